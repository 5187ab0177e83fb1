use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{Generator, MarginalCdf};
use crate::error::{Error, Result};
use crate::quantile::{sample_quantile, Scale, TargetFunction};
use crate::rng::RngStream;

/// Fewest expected exceedances accepted for a Monte Carlo truth.
pub const MIN_TRUTH_EXCEEDANCES: f64 = 50.0;
/// Draws behind the empirical stand-in for a marginal CDF without closed form.
pub const STAND_IN_DRAWS: usize = 1_000_000;
const CHUNK: usize = 16_384;

/// Monte Carlo upper quantiles of each function at each alpha from one set of
/// `size` draws. Returns `[function][alpha]`.
pub fn true_quantiles(
    gen: &Generator,
    marginal: &MarginalCdf,
    functions: &[TargetFunction],
    alphas: &[f64],
    size: usize,
    rng: RngStream,
) -> Result<Vec<Vec<f64>>> {
    gen.validate()?;
    for &a in alphas {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidInput(format!("alpha = {a} not in (0,1)")));
        }
        if (size as f64) * a < MIN_TRUTH_EXCEEDANCES {
            return Err(Error::InvalidInput(format!(
                "truth sample of {size} gives only {} draws above the {a} quantile (need {MIN_TRUTH_EXCEEDANCES})",
                size as f64 * a
            )));
        }
    }
    let chunks = size.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<Vec<f64>>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let rows = gen.generate(CHUNK.min(size - c * CHUNK), rng.substream(c as u64))?;
            Ok(rows.iter().map(|r| evaluate_all(functions, marginal, r)).collect())
        })
        .collect();
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(size); functions.len()];
    for part in parts {
        for row in part? {
            for (k, v) in row.into_iter().enumerate() {
                values[k].push(v);
            }
        }
    }
    values
        .iter()
        .map(|v| alphas.iter().map(|&a| sample_quantile(v, a).map(|q| q.q_hat)).collect())
        .collect()
}

/// Every function at one data-scale row, uniform-scale ones through `marginal`.
pub(crate) fn evaluate_all(functions: &[TargetFunction], marginal: &MarginalCdf, row: &[f64]) -> Vec<f64> {
    let mut u: Option<Vec<f64>> = None;
    functions
        .iter()
        .map(|f| match f.scale() {
            Scale::Data => f.evaluate(row),
            Scale::Uniform => f.evaluate(u.get_or_insert_with(|| marginal.to_uniform(row))),
        })
        .collect()
}

/// Single-function, single-level form of [`true_quantiles`].
pub fn true_quantile_mc(
    gen: &Generator,
    function: &TargetFunction,
    alpha: f64,
    size: usize,
    rng: RngStream,
) -> Result<f64> {
    let marginal = gen.marginal_cdf(STAND_IN_DRAWS, rng.substream(u64::MAX))?;
    Ok(true_quantiles(gen, &marginal, std::slice::from_ref(function), &[alpha], size, rng)?[0][0])
}

/// JSON file of previously computed truths keyed by a hash of everything
/// that determines them.
#[derive(Debug, Default)]
pub struct TruthCache {
    path: Option<PathBuf>,
    entries: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct TruthKey<'a> {
    generator: &'a Generator,
    function: &'a str,
    alpha: f64,
    size: usize,
    rng: RngStream,
}

impl TruthCache {
    /// A cache that is never written to disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or starts) the cache file at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let entries = match std::fs::read_to_string(&path) {
            Ok(s) => serde_json::from_str(&s)
                .map_err(|e| Error::InvalidInput(format!("truth cache {}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::InvalidInput(format!("truth cache {}: {e}", path.display()))),
        };
        Ok(Self { path: Some(path), entries })
    }

    pub fn key(gen: &Generator, function: &str, alpha: f64, size: usize, rng: RngStream) -> String {
        let key = TruthKey { generator: gen, function, alpha, size, rng };
        let json = serde_json::to_vec(&key).expect("key serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn insert(&mut self, key: String, value: f64) {
        self.entries.insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes the cache back if it is file-backed.
    pub fn save(&self) -> Result<()> {
        if let Some(path) = &self.path {
            let json = serde_json::to_string_pretty(&self.entries).expect("map serializes");
            std::fs::write(path, json)
                .map_err(|e| Error::InvalidInput(format!("truth cache {}: {e}", path.display())))?;
        }
        Ok(())
    }
}
