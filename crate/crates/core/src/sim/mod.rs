//! Data generators, Monte Carlo ground truth and the simulation experiments.

mod alpha_hat;
mod experiment;
mod truth;

pub use alpha_hat::{alpha_hat_table, truncated_alpha, AlphaHatConfig, AlphaHatRow};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentResult, PolicyKind, TableRow};
pub use truth::{true_quantile_mc, true_quantiles, TruthCache};

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bicop::PairCopula;
use crate::dvine::DVineModel;
use crate::error::{Error, Result};
use crate::math::{norm_cdf, norm_quantile};
use crate::rng::RngStream;
use crate::sampler::{open_uniform, sample_uniform_vine};

/// Steps discarded before a row of the AR(2) process is recorded.
pub const BURN_IN: usize = 500;
pub const AR_PHI: (f64, f64) = (1.2, -0.6);
/// Rows per independently seeded block in the generators.
const BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Innovation {
    Normal,
    T4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Ar2,
    IidUniform,
    IidNormal,
    IidT4,
    GumbelPair,
    ClaytonPair,
}

/// A data-generating process with its dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub kind: GeneratorKind,
    pub p: usize,
    pub innovation: Innovation,
    /// Copula parameter of the pair generators.
    pub theta: Option<f64>,
}

/// Variance of X_t for the AR(2) process with unit-variance innovations.
pub fn ar2_variance() -> f64 {
    let (a, b) = AR_PHI;
    (1.0 - b) / ((1.0 + b) * ((1.0 - b).powi(2) - a * a))
}

fn t4<R: RngCore>(rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let chi2 = -2.0 * (open_uniform(rng) * open_uniform(rng)).ln();
    z / (chi2 / 4.0).sqrt()
}

fn innovation<R: RngCore>(kind: Innovation, rng: &mut R) -> f64 {
    match kind {
        Innovation::Normal => StandardNormal.sample(rng),
        Innovation::T4 => t4(rng),
    }
}

fn ar2_row<R: RngCore>(p: usize, kind: Innovation, rng: &mut R) -> Vec<f64> {
    let (a, b) = AR_PHI;
    let (mut x1, mut x2) = (0.0, 0.0);
    let mut row = Vec::with_capacity(p);
    for t in 0..BURN_IN + p {
        let x = a * x1 + b * x2 + innovation(kind, rng);
        x2 = x1;
        x1 = x;
        if t >= BURN_IN {
            row.push(x);
        }
    }
    row
}

/// `n_rows` independent rows of `p` consecutive AR(2) values.
pub fn gen_ar2(n_rows: usize, p: usize, kind: Innovation, rng: RngStream) -> Result<Vec<Vec<f64>>> {
    Generator::new(GeneratorKind::Ar2, p, kind, None)?.generate(n_rows, rng)
}

impl Generator {
    pub fn new(kind: GeneratorKind, p: usize, innovation: Innovation, theta: Option<f64>) -> Result<Self> {
        let g = Self { kind, p, innovation, theta };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            GeneratorKind::Ar2 if self.p < 3 => {
                Err(Error::InvalidInput(format!("the AR(2) generator needs p >= 3, got {}", self.p)))
            }
            GeneratorKind::GumbelPair | GeneratorKind::ClaytonPair if self.p < 2 => {
                Err(Error::InvalidInput("copula generators need p >= 2".into()))
            }
            _ if self.p == 0 => Err(Error::InvalidInput("p must be at least 1".into())),
            _ => self.copula().map(|_| ()),
        }
    }

    fn copula(&self) -> Result<Option<DVineModel>> {
        let pair = match self.kind {
            GeneratorKind::GumbelPair => PairCopula::gumbel(self.theta.unwrap_or(2.0))?,
            GeneratorKind::ClaytonPair => PairCopula::clayton(self.theta.unwrap_or(1.0))?,
            _ => return Ok(None),
        };
        Ok(Some(DVineModel::markov(self.p, pair)?))
    }

    /// Draws `n_rows` independent rows.
    pub fn generate(&self, n_rows: usize, rng: RngStream) -> Result<Vec<Vec<f64>>> {
        if let Some(model) = self.copula()? {
            return sample_uniform_vine(&model, n_rows, rng);
        }
        let blocks = n_rows.div_ceil(BLOCK);
        let parts: Vec<Vec<Vec<f64>>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let rows = BLOCK.min(n_rows - b * BLOCK);
                let mut gen = rng.substream(b as u64).rng();
                (0..rows).map(|_| self.row(&mut gen)).collect()
            })
            .collect();
        Ok(parts.into_iter().flatten().collect())
    }

    fn row<R: RngCore>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            GeneratorKind::Ar2 => ar2_row(self.p, self.innovation, rng),
            GeneratorKind::IidUniform => (0..self.p).map(|_| open_uniform(rng)).collect(),
            GeneratorKind::IidNormal => (0..self.p).map(|_| StandardNormal.sample(rng)).collect(),
            GeneratorKind::IidT4 => (0..self.p).map(|_| t4(rng)).collect(),
            GeneratorKind::GumbelPair | GeneratorKind::ClaytonPair => unreachable!("copula generators sample vines"),
        }
    }

    /// The common marginal distribution function of the coordinates.
    ///
    /// Exact except for AR(2) with t4 innovations, where it is the empirical
    /// CDF of `stand_in` stationary draws.
    pub fn marginal_cdf(&self, stand_in: usize, rng: RngStream) -> Result<MarginalCdf> {
        Ok(match (self.kind, self.innovation) {
            (GeneratorKind::Ar2, Innovation::Normal) => MarginalCdf::Normal { sd: ar2_variance().sqrt() },
            (GeneratorKind::Ar2, Innovation::T4) => {
                let rows = self.generate(stand_in.div_ceil(self.p), rng)?;
                let mut v: Vec<f64> = rows.into_iter().flatten().take(stand_in).collect();
                v.sort_by(f64::total_cmp);
                MarginalCdf::Empirical(v)
            }
            (GeneratorKind::IidNormal, _) => MarginalCdf::Normal { sd: 1.0 },
            (GeneratorKind::IidT4, _) => MarginalCdf::T4,
            _ => MarginalCdf::Uniform,
        })
    }
}

/// A univariate distribution function used to put data on the uniform scale.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalCdf {
    Uniform,
    Normal { sd: f64 },
    T4,
    /// Sorted draws; `F(x) = #{draws ≤ x} / (len + 1)`.
    Empirical(Vec<f64>),
}

impl MarginalCdf {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            MarginalCdf::Uniform => x.clamp(0.0, 1.0),
            MarginalCdf::Normal { sd } => norm_cdf(x / sd),
            MarginalCdf::T4 => {
                let s = x / (4.0 + x * x).sqrt();
                0.5 + 0.25 * s * (3.0 - s * s)
            }
            MarginalCdf::Empirical(v) => crate::marginals::empirical_cdf(v, x),
        }
    }

    /// Quantile function; the empirical variant uses the step inverse.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            MarginalCdf::Uniform => u,
            MarginalCdf::Normal { sd } => sd * norm_quantile(u),
            MarginalCdf::T4 => StudentsT::new(0.0, 1.0, 4.0).expect("valid t4").inverse_cdf(u),
            MarginalCdf::Empirical(v) => {
                crate::marginals::inverse_empirical(v, u).expect("stand-in sample is non-empty")
            }
        }
    }

    pub fn to_uniform(&self, row: &[f64]) -> Vec<f64> {
        row.iter().map(|&x| self.cdf(x)).collect()
    }
}
