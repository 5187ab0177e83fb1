//! Rank transform to pseudo-observations and its step-function inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rank-transformed sample together with the sorted original columns needed
/// to map copula draws back to the data scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSample {
    n: usize,
    p: usize,
    /// Column-major pseudo-observations, `columns[j][i] = U_ij`.
    columns: Vec<Vec<f64>>,
    sorted_columns: Vec<Vec<f64>>,
}

impl PseudoSample {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Pseudo-observations of variable `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// The `i`-th pseudo-observation vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i)).collect()
    }

    /// Original observations of variable `j`, ascending.
    pub fn sorted_column(&self, j: usize) -> &[f64] {
        &self.sorted_columns[j]
    }

    pub fn sorted_columns(&self) -> &[Vec<f64>] {
        &self.sorted_columns
    }

    /// Empirical marginal CDF `#{X_ij ≤ x} / (n + 1)`.
    pub fn empirical_cdf(&self, j: usize, x: f64) -> f64 {
        empirical_cdf(&self.sorted_columns[j], x)
    }

    /// Maps a uniform-scale row back to the data scale.
    pub fn to_data_scale(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: u.len() });
        }
        u.iter()
            .zip(&self.sorted_columns)
            .map(|(&u, col)| inverse_empirical(col, u))
            .collect()
    }

    /// As [`Self::to_data_scale`] with a choice of inverse.
    pub fn to_data_scale_with(&self, u: &[f64], rule: MarginalInverse) -> Result<Vec<f64>> {
        if u.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: u.len() });
        }
        u.iter().zip(&self.sorted_columns).map(|(&u, col)| rule.apply(col, u)).collect()
    }

    /// Builds a sample directly from uniform-scale columns, treating them as
    /// both the pseudo-observations and the data.
    pub fn from_uniform_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let p = columns.len();
        if p == 0 {
            return Err(Error::InvalidInput("no columns".into()));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput("ragged columns".into()));
        }
        let sorted_columns = columns
            .iter()
            .map(|c| {
                let mut s = c.clone();
                s.sort_by(f64::total_cmp);
                s
            })
            .collect();
        Ok(Self { n, p, columns, sorted_columns })
    }
}

/// `#{x_k ≤ x} / (n + 1)` for an ascending column.
pub fn empirical_cdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / (sorted.len() + 1) as f64
}

/// Rank-transforms an `n × p` data matrix given as rows.
///
/// Ties share the larger rank: `U_ij = #{k : X_kj ≤ X_ij} / (n + 1)`.
pub fn pseudo_observations(rows: &[Vec<f64>]) -> Result<PseudoSample> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 observations, got {n}")));
    }
    let p = rows[0].len();
    if p == 0 {
        return Err(Error::InvalidInput("rows have no columns".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != p {
            return Err(Error::InvalidInput(format!(
                "row {} has {} entries, expected {p}",
                i + 1,
                r.len()
            )));
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                i + 1,
                j + 1
            )));
        }
    }

    let denom = (n + 1) as f64;
    let mut columns = Vec::with_capacity(p);
    let mut sorted_columns = Vec::with_capacity(p);
    for j in 0..p {
        let mut sorted: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        sorted.sort_by(f64::total_cmp);
        let u = rows
            .iter()
            .map(|r| sorted.partition_point(|&v| v <= r[j]) as f64 / denom)
            .collect();
        columns.push(u);
        sorted_columns.push(sorted);
    }
    Ok(PseudoSample { n, p, columns, sorted_columns })
}

/// Generalized inverse of the empirical CDF: the smallest order statistic
/// `x_(k)` with `k / (n + 1) ≥ u`, clamped to `x_(1)` and `x_(n)`.
pub fn inverse_empirical(sorted: &[f64], u: f64) -> Result<f64> {
    let n = sorted.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty column".into()));
    }
    Ok(sorted[inverse_index(n, u)])
}

/// Nearest-grid-point inverse: `x_(k)` with `k = round(u·(n + 1))`, clamped
/// to `1..=n`. Each interior order statistic keeps mass `1/(n + 1)` and the
/// two extremes share the leftover tails equally.
pub fn inverse_empirical_midpoint(sorted: &[f64], u: f64) -> Result<f64> {
    let n = sorted.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty column".into()));
    }
    let k = (u * (n + 1) as f64).round().clamp(1.0, n as f64) as usize;
    Ok(sorted[k - 1])
}

/// How bootstrap draws on the copula scale are mapped to data values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalInverse {
    /// [`inverse_empirical`].
    Step,
    /// [`inverse_empirical_midpoint`].
    #[default]
    Midpoint,
}

impl MarginalInverse {
    pub fn apply(self, sorted: &[f64], u: f64) -> Result<f64> {
        match self {
            MarginalInverse::Step => inverse_empirical(sorted, u),
            MarginalInverse::Midpoint => inverse_empirical_midpoint(sorted, u),
        }
    }
}

impl std::str::FromStr for MarginalInverse {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(MarginalInverse::Step),
            "midpoint" => Ok(MarginalInverse::Midpoint),
            _ => Err(Error::InvalidInput(format!("unknown marginal inverse '{s}' (step|midpoint)"))),
        }
    }
}

/// Zero-based order-statistic index selected by [`inverse_empirical`].
pub(crate) fn inverse_index(n: usize, u: f64) -> usize {
    let t = u * (n + 1) as f64;
    // Grid points r/(n+1) must map back to r despite rounding in u.
    let r = t.round();
    let k = if (t - r).abs() <= 1e-9 * t.abs().max(1.0) { r } else { t.ceil() };
    (k.max(1.0).min(n as f64) as usize) - 1
}
