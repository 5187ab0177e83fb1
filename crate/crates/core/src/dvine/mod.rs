//! D-vine copulas over naturally ordered variables.
//!
//! Tree `j` (1-based) holds the `p − j` pair copulas
//! `c_{i, i+j | i+1, …, i+j−1}`. Their arguments are the conditional
//! distribution functions `F(u_i | u_{i+1..i+j−1})` ("left") and
//! `F(u_{i+j} | u_{i+1..i+j−1})` ("right"), obtained from tree `j − 1` through
//! h-functions. Trees above the truncation level are independence copulas and
//! are not stored.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bicop::{clamp_unit, fit_pair, select_family, Family, PairCopula, PairFit};
use crate::error::{Error, Result};
use crate::marginals::PseudoSample;

/// A fitted (or hand-specified) pair copula inside a vine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VinePair {
    pub copula: PairCopula,
    /// Log-likelihood contribution at fit time; 0 for hand-built models.
    pub loglik: f64,
}

#[derive(Serialize, Deserialize)]
struct RawVinePair {
    family: Family,
    theta: Vec<f64>,
    #[serde(default)]
    loglik: f64,
}

impl Serialize for VinePair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawVinePair { family: self.copula.family(), theta: self.copula.params(), loglik: self.loglik }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VinePair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawVinePair::deserialize(d)?;
        let copula = match (raw.family, raw.theta.as_slice()) {
            (Family::Independence, []) => PairCopula::independence(),
            (f, [t]) => PairCopula::new(f, *t).map_err(serde::de::Error::custom)?,
            (f, t) => {
                return Err(serde::de::Error::custom(format!(
                    "family {f} expects {} parameter(s), got {}",
                    f.n_params(),
                    t.len()
                )))
            }
        };
        Ok(VinePair { copula, loglik: raw.loglik })
    }
}

impl From<PairCopula> for VinePair {
    fn from(copula: PairCopula) -> Self {
        VinePair { copula, loglik: 0.0 }
    }
}

impl From<PairFit> for VinePair {
    fn from(f: PairFit) -> Self {
        VinePair { copula: f.copula, loglik: f.loglik }
    }
}

/// A truncated D-vine. `trees[0]` is tree 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DVineModel {
    p: usize,
    m_trunc: usize,
    trees: Vec<Vec<VinePair>>,
}

#[derive(Deserialize)]
struct RawModel {
    p: usize,
    m_trunc: usize,
    trees: Vec<Vec<VinePair>>,
}

impl<'de> Deserialize<'de> for DVineModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawModel::deserialize(d)?;
        if raw.trees.len() != raw.m_trunc {
            return Err(serde::de::Error::custom(format!(
                "m_trunc = {} but {} trees given",
                raw.m_trunc,
                raw.trees.len()
            )));
        }
        DVineModel::from_pairs(raw.p, raw.trees).map_err(serde::de::Error::custom)
    }
}

impl DVineModel {
    /// Builds a model from per-tree pair copulas.
    pub fn new(p: usize, trees: Vec<Vec<PairCopula>>) -> Result<Self> {
        Self::from_pairs(p, trees.into_iter().map(|t| t.into_iter().map(VinePair::from).collect()).collect())
    }

    pub fn from_pairs(p: usize, trees: Vec<Vec<VinePair>>) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidInput(format!("a vine needs p >= 2, got {p}")));
        }
        let m = trees.len();
        if m < 1 || m > p - 1 {
            return Err(Error::InvalidInput(format!("truncation level {m} outside [1, {}]", p - 1)));
        }
        for (j, t) in trees.iter().enumerate() {
            if t.len() != p - j - 1 {
                return Err(Error::InvalidInput(format!(
                    "tree {} has {} pairs, expected {}",
                    j + 1,
                    t.len(),
                    p - j - 1
                )));
            }
        }
        Ok(Self { p, m_trunc: m, trees })
    }

    pub fn independence(p: usize) -> Result<Self> {
        Self::new(p, vec![vec![PairCopula::independence(); p.saturating_sub(1)]])
    }

    /// A Markov (first-order) vine with the same copula on every tree-1 edge.
    pub fn markov(p: usize, pair: PairCopula) -> Result<Self> {
        Self::new(p, vec![vec![pair; p.saturating_sub(1)]])
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m_trunc(&self) -> usize {
        self.m_trunc
    }

    pub fn trees(&self) -> &[Vec<VinePair>] {
        &self.trees
    }

    /// Pair copula of `tree` (1-based) at `position` (1-based), the copula
    /// `c_{i, i+tree | …}` with `i = position`. Independence above `m_trunc`.
    pub fn pair(&self, tree: usize, position: usize) -> PairCopula {
        if tree > self.m_trunc {
            PairCopula::independence()
        } else {
            self.trees[tree - 1][position - 1].copula
        }
    }

    pub fn n_params(&self) -> usize {
        self.trees.iter().flatten().map(|p| p.copula.family().n_params()).sum()
    }

    /// Total fitted log-likelihood.
    pub fn loglik(&self) -> f64 {
        self.trees.iter().flatten().map(|p| p.loglik).sum()
    }

    pub fn aic(&self) -> f64 {
        -2.0 * self.loglik() + 2.0 * self.n_params() as f64
    }

    /// Cumulative AIC of the first `level` trees.
    pub fn aic_at(&self, level: usize) -> f64 {
        self.trees[..level]
            .iter()
            .flatten()
            .map(|p| -2.0 * p.loglik + 2.0 * p.copula.family().n_params() as f64)
            .sum()
    }

    /// The same vine cut back to `level` trees.
    pub fn truncated(&self, level: usize) -> Result<Self> {
        Self::from_pairs(self.p, self.trees[..level.min(self.m_trunc)].to_vec())
    }

    /// Log copula density at `u`.
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: u.len() });
        }
        if let Some(x) = u.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Domain(format!("{x} not in (0,1)")));
        }
        let mut left: Vec<f64> = u[..self.p - 1].to_vec();
        let mut right: Vec<f64> = u[1..].to_vec();
        let mut total = 0.0;
        for (j, tree) in self.trees.iter().enumerate() {
            for (i, pair) in tree.iter().enumerate() {
                total += pair.copula.log_pdf(left[i], right[i]);
            }
            if j + 1 < self.m_trunc {
                let (l, r) = next_arguments(tree, &left, &right);
                left = l;
                right = r;
            }
        }
        Ok(total)
    }

    /// One-line description of the tree structure and families.
    pub fn summary(&self) -> ModelSummary {
        let mut counts = std::collections::BTreeMap::new();
        for p in self.trees.iter().flatten() {
            *counts.entry(p.copula.family().name().to_string()).or_insert(0usize) += 1;
        }
        ModelSummary {
            p: self.p,
            m_trunc: self.m_trunc,
            n_params: self.n_params(),
            loglik: self.loglik(),
            aic: self.aic(),
            family_counts: counts,
        }
    }
}

/// Compact provenance of a fitted vine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub p: usize,
    pub m_trunc: usize,
    pub n_params: usize,
    pub loglik: f64,
    pub aic: f64,
    pub family_counts: std::collections::BTreeMap<String, usize>,
}

/// Arguments of tree `j + 1` from those of tree `j` for a single point.
fn next_arguments(tree: &[VinePair], left: &[f64], right: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = tree.len() - 1;
    let mut nl = Vec::with_capacity(k);
    let mut nr = Vec::with_capacity(k);
    for i in 0..k {
        nl.push(clamp_unit(tree[i].copula.h2(left[i], right[i])));
        nr.push(clamp_unit(tree[i + 1].copula.h1(left[i + 1], right[i + 1])));
    }
    (nl, nr)
}

/// Column-wise pair-copula arguments for one tree: `left[i][k]` and
/// `right[i][k]` feed edge `i` at observation `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeArgs {
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

impl TreeArgs {
    /// Tree-1 arguments: the raw pseudo-observations of adjacent variables.
    pub fn first(sample: &PseudoSample) -> Self {
        let cols = sample.columns();
        TreeArgs { left: cols[..cols.len() - 1].to_vec(), right: cols[1..].to_vec() }
    }

    /// Applies the h-functions of the fitted `tree` to obtain the next tree's
    /// arguments, clamped into `[1e-10, 1 − 1e-10]`.
    pub fn next(&self, tree: &[PairCopula]) -> Self {
        let k = tree.len() - 1;
        let (left, right) = (0..k)
            .into_par_iter()
            .map(|i| {
                let l: Vec<f64> = self.left[i]
                    .iter()
                    .zip(&self.right[i])
                    .map(|(&a, &b)| clamp_unit(tree[i].h2(a, b)))
                    .collect();
                let r: Vec<f64> = self.left[i + 1]
                    .iter()
                    .zip(&self.right[i + 1])
                    .map(|(&a, &b)| clamp_unit(tree[i + 1].h1(a, b)))
                    .collect();
                (l, r)
            })
            .unzip();
        TreeArgs { left, right }
    }
}

/// Arguments of `tree` (1-based) for every observation in `sample`, computed
/// through trees `1..tree − 1` of `model`.
pub fn conditional_pseudo(model: &DVineModel, sample: &PseudoSample, tree: usize) -> Result<TreeArgs> {
    if sample.p() != model.p() {
        return Err(Error::DimensionMismatch { expected: model.p(), got: sample.p() });
    }
    if tree < 1 || tree > model.p() - 1 || tree > model.m_trunc() + 1 {
        return Err(Error::InvalidInput(format!("tree {tree} is not reachable from this model")));
    }
    let mut args = TreeArgs::first(sample);
    for j in 1..tree {
        let copulas: Vec<PairCopula> = model.trees()[j - 1].iter().map(|p| p.copula).collect();
        args = args.next(&copulas);
    }
    Ok(args)
}

/// How the family of each pair copula is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyPolicy {
    Fixed(Family),
    Aic(Vec<Family>),
}

impl FamilyPolicy {
    pub fn gaussian() -> Self {
        FamilyPolicy::Fixed(Family::Gaussian)
    }

    /// AIC selection over every supported family.
    pub fn aic() -> Self {
        FamilyPolicy::Aic(Family::ALL.to_vec())
    }

    fn fit(&self, u: &[f64], v: &[f64]) -> Result<PairFit> {
        match self {
            FamilyPolicy::Fixed(f) => fit_pair(u, v, *f),
            FamilyPolicy::Aic(c) => select_family(u, v, c),
        }
    }
}

/// How many trees to fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeSelection {
    /// Exactly this many trees (capped at `p − 1`).
    Fixed(usize),
    /// Cumulative-AIC choice among `1..=max_level` (default `p − 1`).
    Aic { max_level: Option<usize> },
}

/// A complete fitting recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaPolicy {
    pub families: FamilyPolicy,
    pub trees: TreeSelection,
}

impl CopulaPolicy {
    /// Two trees of Gaussian pair copulas.
    pub fn copula_i() -> Self {
        Self { families: FamilyPolicy::gaussian(), trees: TreeSelection::Fixed(2) }
    }

    /// Two trees with AIC-selected families.
    pub fn copula_ii() -> Self {
        Self { families: FamilyPolicy::aic(), trees: TreeSelection::Fixed(2) }
    }

    /// AIC-selected families and truncation level.
    pub fn copula_iii(max_level: Option<usize>) -> Self {
        Self { families: FamilyPolicy::aic(), trees: TreeSelection::Aic { max_level } }
    }

    pub fn fit(&self, sample: &PseudoSample) -> Result<DVineModel> {
        let top = sample.p().saturating_sub(1).max(1);
        match self.trees {
            TreeSelection::Fixed(m) => fit_sequential(sample, m.clamp(1, top), &self.families),
            TreeSelection::Aic { max_level } => {
                select_truncation(sample, &self.families, max_level.unwrap_or(top).clamp(1, top))
            }
        }
    }

    /// Short name: `gauss2`, `aic2`, `aicfull`, or a generic description.
    pub fn name(&self) -> String {
        match (&self.families, self.trees) {
            (FamilyPolicy::Fixed(Family::Gaussian), TreeSelection::Fixed(2)) => "gauss2".into(),
            (FamilyPolicy::Aic(c), TreeSelection::Fixed(2)) if c.as_slice() == Family::ALL => "aic2".into(),
            (FamilyPolicy::Aic(c), TreeSelection::Aic { .. }) if c.as_slice() == Family::ALL => {
                "aicfull".into()
            }
            (FamilyPolicy::Fixed(f), TreeSelection::Fixed(m)) => format!("{f}{m}"),
            (FamilyPolicy::Fixed(f), TreeSelection::Aic { .. }) => format!("{f}-aictrees"),
            (FamilyPolicy::Aic(_), TreeSelection::Fixed(m)) => format!("aicsubset{m}"),
            (FamilyPolicy::Aic(_), TreeSelection::Aic { .. }) => "aicsubset-full".into(),
        }
    }
}

impl FromStr for CopulaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss2" | "copula1" | "copula-i" => Ok(Self::copula_i()),
            "aic2" | "copula2" | "copula-ii" => Ok(Self::copula_ii()),
            "aicfull" | "copula3" | "copula-iii" => Ok(Self::copula_iii(None)),
            _ => Err(Error::InvalidInput(format!("unknown copula policy '{s}' (gauss2|aic2|aicfull)"))),
        }
    }
}

impl fmt::Display for CopulaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn fit_tree(args: &TreeArgs, policy: &FamilyPolicy, tree: usize) -> Result<Vec<PairFit>> {
    (0..args.left.len())
        .into_par_iter()
        .map(|i| {
            policy
                .fit(&args.left[i], &args.right[i])
                .map_err(|e| e.context(format!("tree {tree}, pair {}", i + 1)))
        })
        .collect()
}

/// Tree-by-tree maximum-likelihood fit of an `m_trunc`-level D-vine.
pub fn fit_sequential(sample: &PseudoSample, m_trunc: usize, policy: &FamilyPolicy) -> Result<DVineModel> {
    let p = sample.p();
    if p < 2 {
        return Err(Error::InvalidInput(format!("a vine needs p >= 2, got {p}")));
    }
    if m_trunc < 1 || m_trunc > p - 1 {
        return Err(Error::InvalidInput(format!("truncation level {m_trunc} outside [1, {}]", p - 1)));
    }
    let mut trees: Vec<Vec<VinePair>> = Vec::with_capacity(m_trunc);
    let mut args = TreeArgs::first(sample);
    for j in 1..=m_trunc {
        let fits = fit_tree(&args, policy, j)?;
        if j < m_trunc {
            let copulas: Vec<PairCopula> = fits.iter().map(|f| f.copula).collect();
            args = args.next(&copulas);
        }
        trees.push(fits.into_iter().map(VinePair::from).collect());
    }
    DVineModel::from_pairs(p, trees)
}

/// Fits trees `1..=max_level` and keeps the level with minimal cumulative
/// AIC, preferring the smaller level on ties.
pub fn select_truncation(sample: &PseudoSample, policy: &FamilyPolicy, max_level: usize) -> Result<DVineModel> {
    let full = fit_sequential(sample, max_level, policy)?;
    let mut best = 1;
    let mut best_aic = full.aic_at(1);
    for level in 2..=max_level {
        let aic = full.aic_at(level);
        if aic < best_aic {
            best = level;
            best_aic = aic;
        }
    }
    full.truncated(best)
}
