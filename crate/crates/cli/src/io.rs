use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Reads a numeric CSV into rows. Every row must have the same width.
pub fn read_rows(path: &Path, has_header: bool) -> CliResult<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(has_header).flexible(true).trim(csv::Trim::All).from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    CliError::input(format!(
                        "{}, line {line}, column {}: '{field}' is not a finite number",
                        path.display(),
                        j + 1
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::input(format!(
                    "{}, line {line}: {} fields, expected {}",
                    path.display(),
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Writes rows under an `x1..xp` header to `out`, or stdout.
pub fn write_rows(rows: &[Vec<f64>], out: Option<&Path>) -> CliResult<()> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let p = rows.first().map_or(0, Vec::len);
    let fail = |e: csv::Error| CliError::input(format!("writing sample: {e}"));
    w.write_record((1..=p).map(|j| format!("x{j}"))).map_err(fail)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string)).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::input(format!("writing sample: {e}")))
}

pub fn write_json(value: &impl Serialize, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    match out {
        Some(p) => write_text(p, &(text + "\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    create(path)?.write_all(text.as_bytes()).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}
