use std::fmt;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const INPUT: u8 = 2;
pub const DEGENERATE: u8 = 3;
pub const NUMERIC: u8 = 4;

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: INPUT, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<vinequant::Error> for CliError {
    fn from(e: vinequant::Error) -> Self {
        let code = match e {
            vinequant::Error::DegenerateData(_) => DEGENERATE,
            vinequant::Error::Numeric(_) => NUMERIC,
            _ => INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
