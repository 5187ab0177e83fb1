//! Goodness of fit of a fitted vine: empirical copula, Cramér–von Mises and
//! Kolmogorov–Smirnov distances, and parametric-bootstrap p-values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dvine::{CopulaPolicy, DVineModel};
use crate::error::{Error, Result};
use crate::marginals::{pseudo_observations, PseudoSample};
use crate::rng::RngStream;
use crate::sampler::sample_uniform_vine;

/// Largest tolerated fraction of failed bootstrap refits.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// Test statistics with their bootstrap p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub tn: f64,
    pub sn: f64,
    pub p_value_tn: f64,
    pub p_value_sn: f64,
    pub b: usize,
    /// Replicates dropped because the refit failed.
    pub failures: usize,
}

fn dominated(row: &[f64], u: &[f64]) -> bool {
    row.iter().zip(u).all(|(a, b)| a <= b)
}

fn check_point(p: usize, u: &[f64]) -> Result<()> {
    if u.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: u.len() });
    }
    if let Some(x) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("{x} not in [0,1]")));
    }
    Ok(())
}

/// Fraction of pseudo-observation rows componentwise below `u`.
pub fn empirical_copula(sample: &PseudoSample, u: &[f64]) -> Result<f64> {
    check_point(sample.p(), u)?;
    let count = (0..sample.n())
        .filter(|&i| sample.columns().iter().zip(u).all(|(c, &b)| c[i] <= b))
        .count();
    Ok(count as f64 / sample.n() as f64)
}

/// Monte Carlo CDF of a vine, with one set of draws shared by every
/// evaluation point.
pub struct ModelCdf {
    p: usize,
    draws: Vec<Vec<f64>>,
}

impl ModelCdf {
    pub fn new(model: &DVineModel, n_mc: usize, rng: RngStream) -> Result<Self> {
        Ok(Self { p: model.p(), draws: sample_uniform_vine(model, n_mc, rng)? })
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        check_point(self.p, u)?;
        if u.iter().all(|&x| x == 1.0) {
            return Ok(1.0);
        }
        Ok(self.fraction_below(u))
    }

    fn fraction_below(&self, u: &[f64]) -> f64 {
        self.draws.iter().filter(|r| dominated(r, u)).count() as f64 / self.draws.len() as f64
    }
}

/// Monte Carlo estimate of `C(u)` under the model from `n_mc` draws.
pub fn model_copula_cdf(model: &DVineModel, u: &[f64], n_mc: usize, rng: RngStream) -> Result<f64> {
    check_point(model.p(), u)?;
    if u.iter().all(|&x| x == 1.0) {
        return Ok(1.0);
    }
    ModelCdf::new(model, n_mc, rng)?.eval(u)
}

/// `(Tₙ, Sₙ)` of `cdf` against the empirical copula, both evaluated at the
/// pseudo-observations.
pub fn statistics_against(sample: &PseudoSample, cdf: impl Fn(&[f64]) -> f64 + Sync) -> (f64, f64) {
    let rows = sample.rows();
    let n = rows.len() as f64;
    let diffs: Vec<f64> = rows
        .par_iter()
        .map(|u| {
            let emp = rows.iter().filter(|r| dominated(r, u)).count() as f64 / n;
            cdf(u) - emp
        })
        .collect();
    let tn = diffs.iter().map(|d| d * d).sum::<f64>();
    let sn = n.sqrt() * diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    (tn, sn)
}

/// `(Tₙ, Sₙ)` for a fitted model, its CDF estimated from `n_mc` draws.
pub fn gof_statistics(sample: &PseudoSample, model: &DVineModel, n_mc: usize, rng: RngStream) -> Result<(f64, f64)> {
    if sample.p() != model.p() {
        return Err(Error::DimensionMismatch { expected: model.p(), got: sample.p() });
    }
    let cdf = ModelCdf::new(model, n_mc, rng)?;
    Ok(statistics_against(sample, |u| cdf.fraction_below(u)))
}

/// Parametric-bootstrap p-values for `Tₙ` and `Sₙ` of the vine fitted to
/// `sample` under `policy`.
///
/// Each replicate simulates `n` rows from the fitted model, re-ranks them,
/// refits and recomputes both statistics.
pub fn parametric_bootstrap_pvalue(
    sample: &PseudoSample,
    policy: &CopulaPolicy,
    b: usize,
    n_mc: usize,
    rng: RngStream,
) -> Result<GofResult> {
    if b == 0 {
        return Err(Error::InvalidInput("bootstrap count b must be at least 1".into()));
    }
    let model = policy.fit(sample)?;
    let (tn, sn) = gof_statistics(sample, &model, n_mc, rng.substream(0))?;
    let n = sample.n();
    let reps: Vec<Result<(f64, f64)>> = (1..=b as u64)
        .into_par_iter()
        .map(|r| {
            let stream = rng.substream(r);
            let rows = sample_uniform_vine(&model, n, stream.substream(0))?;
            let star = pseudo_observations(&rows)?;
            let refit = policy.fit(&star)?;
            gof_statistics(&star, &refit, n_mc, stream.substream(1))
        })
        .collect();
    let mut stats = Vec::with_capacity(b);
    let mut last_err = None;
    for r in reps {
        match r {
            Ok(s) => stats.push(s),
            Err(e) => last_err = Some(e),
        }
    }
    let failures = b - stats.len();
    if failures as f64 > MAX_FAILURE_RATE * b as f64 {
        let e = last_err.expect("failures imply an error");
        return Err(e.context(format!("{failures} of {b} bootstrap refits failed")));
    }
    if failures > 0 {
        log::warn!("{failures} of {b} bootstrap refits failed and were dropped");
    }
    let ok = stats.len() as f64;
    let p_value_tn = (1.0 + stats.iter().filter(|s| s.0 >= tn).count() as f64) / (ok + 1.0);
    let p_value_sn = (1.0 + stats.iter().filter(|s| s.1 >= sn).count() as f64) / (ok + 1.0);
    Ok(GofResult { tn, sn, p_value_tn, p_value_sn, b, failures })
}
