use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a subcommand and get the same output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub threads: usize,
    pub inputs: Vec<InputDigest>,
    pub started: String,
    pub finished: Option<String>,
}

impl RunManifest {
    pub fn start(subcommand: &str, config: &impl Serialize, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.into(),
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            threads: rayon::current_num_threads(),
            inputs: Vec::new(),
            started: now(),
            finished: None,
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(InputDigest { path: path.to_path_buf(), sha256 });
        Ok(())
    }

    /// Stamps the end time and writes to `dest`, or to stderr without one.
    pub fn finish(mut self, dest: Option<&Path>) -> CliResult<()> {
        self.finished = Some(now());
        match dest {
            Some(p) => io::write_json(&self, Some(p)),
            None => {
                eprintln!("manifest: {}", serde_json::to_string(&self).expect("manifest serializes"));
                Ok(())
            }
        }
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// `model.json` becomes `model.json.manifest.json`.
pub fn beside(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
