use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::truth::true_quantiles;
use super::{Generator, GeneratorKind, Innovation};
use crate::error::{Error, Result};
use crate::quantile::TargetFunction;
use crate::rng::RngStream;

const CHUNK: usize = 16_384;

/// The truncated-exceedance experiment for i.i.d. coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaHatConfig {
    #[serde(default = "default_laws")]
    pub laws: Vec<GeneratorKind>,
    #[serde(default = "default_ns")]
    pub n: Vec<usize>,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_laws() -> Vec<GeneratorKind> {
    vec![GeneratorKind::IidUniform, GeneratorKind::IidNormal, GeneratorKind::IidT4]
}

fn default_ns() -> Vec<usize> {
    vec![500, 1000]
}

fn default_p() -> usize {
    20
}

pub(crate) fn default_alphas() -> Vec<f64> {
    vec![0.05, 0.01, 0.005, 0.001, 0.0005]
}

fn default_reps() -> usize {
    1_000_000
}

impl Default for AlphaHatConfig {
    fn default() -> Self {
        Self {
            laws: default_laws(),
            n: default_ns(),
            p: default_p(),
            alphas: default_alphas(),
            replications: default_reps(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaHatRow {
    pub law: GeneratorKind,
    pub n: usize,
    pub alpha: f64,
    pub alpha_hat: f64,
    /// Monte Carlo `Q_ξ(α)` used for the exceedance event.
    pub quantile: f64,
}

/// `P{ξ > Q_ξ(α), F⁻¹(1/n) ≤ X_j ≤ F⁻¹(1 − 1/n) for all j}` for the mean `ξ`
/// of `p` i.i.d. coordinates, for every `n` and `α`.
pub fn alpha_hat_table(config: &AlphaHatConfig) -> Result<Vec<AlphaHatRow>> {
    if config.replications == 0 || config.n.iter().any(|&n| n < 2) {
        return Err(Error::InvalidInput("need replications >= 1 and every n >= 2".into()));
    }
    let root = RngStream::new(config.seed);
    let mut out = Vec::new();
    for (l, &law) in config.laws.iter().enumerate() {
        if !matches!(law, GeneratorKind::IidUniform | GeneratorKind::IidNormal | GeneratorKind::IidT4) {
            return Err(Error::InvalidInput(format!("{law:?} is not an i.i.d. law")));
        }
        let gen = Generator::new(law, config.p, Innovation::Normal, None)?;
        let marginal = gen.marginal_cdf(0, root)?;
        let stream = root.substream(l as u64);
        let q = true_quantiles(
            &gen,
            &marginal,
            &[TargetFunction::H3],
            &config.alphas,
            config.replications,
            stream.substream(0),
        )?
        .remove(0);
        let bounds: Vec<(f64, f64)> = config
            .n
            .iter()
            .map(|&n| (marginal.quantile(1.0 / n as f64), marginal.quantile(1.0 - 1.0 / n as f64)))
            .collect();
        let counts = count_truncated(&gen, &q, &bounds, config.replications, stream.substream(1))?;
        for (i, &n) in config.n.iter().enumerate() {
            for (a, &alpha) in config.alphas.iter().enumerate() {
                out.push(AlphaHatRow {
                    law,
                    n,
                    alpha,
                    alpha_hat: counts[i][a] as f64 / config.replications as f64,
                    quantile: q[a],
                });
            }
        }
    }
    Ok(out)
}

fn count_truncated(
    gen: &Generator,
    q: &[f64],
    bounds: &[(f64, f64)],
    reps: usize,
    rng: RngStream,
) -> Result<Vec<Vec<usize>>> {
    let chunks = reps.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<Vec<usize>>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let rows = gen.generate(CHUNK.min(reps - c * CHUNK), rng.substream(c as u64))?;
            let mut counts = vec![vec![0usize; q.len()]; bounds.len()];
            for row in &rows {
                let xi = TargetFunction::H3.evaluate(row);
                let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (i, &(a, b)) in bounds.iter().enumerate() {
                    if lo >= a && hi <= b {
                        for (k, &qk) in q.iter().enumerate() {
                            counts[i][k] += (xi > qk) as usize;
                        }
                    }
                }
            }
            Ok(counts)
        })
        .collect();
    let mut total = vec![vec![0usize; q.len()]; bounds.len()];
    for part in parts {
        for (t, c) in total.iter_mut().zip(part?) {
            for (x, y) in t.iter_mut().zip(c) {
                *x += y;
            }
        }
    }
    Ok(total)
}

/// Single-cell form of [`alpha_hat_table`].
pub fn truncated_alpha(law: GeneratorKind, p: usize, n: usize, alpha: f64, reps: usize, seed: u64) -> Result<f64> {
    let config = AlphaHatConfig { laws: vec![law], n: vec![n], p, alphas: vec![alpha], replications: reps, seed };
    Ok(alpha_hat_table(&config)?[0].alpha_hat)
}
