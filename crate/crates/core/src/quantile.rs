//! Target functions and the bootstrap extreme-quantile estimator.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dvine::{CopulaPolicy, DVineModel, ModelSummary};
use crate::error::{Error, Result};
use crate::marginals::{pseudo_observations, MarginalInverse, PseudoSample};
use crate::rng::RngStream;
use crate::sampler::sample_uniform_vine;

/// Below this many upper-tail draws the quantile estimate is unreliable.
pub const MIN_TAIL_DRAWS: f64 = 20.0;

/// Which scale a target function reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Original data units.
    Data,
    /// Marginal probability transforms `F_t(X_t)`.
    Uniform,
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The functional `ξ = h(X)` whose upper quantile is estimated.
#[derive(Clone)]
pub enum TargetFunction {
    /// Sum of the three largest coordinates.
    H1,
    /// Smallest marginal probability transform.
    H2,
    /// Mean of the coordinates.
    H3,
    /// Mean of the upper-tail probabilities `1 − F_t(X_t)`.
    H4,
    Custom { name: String, scale: Scale, eval: Evaluator },
}

impl TargetFunction {
    pub fn custom(
        name: impl Into<String>,
        scale: Scale,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TargetFunction::Custom { name: name.into(), scale, eval: Arc::new(eval) }
    }

    pub fn builtins() -> [TargetFunction; 4] {
        [TargetFunction::H1, TargetFunction::H2, TargetFunction::H3, TargetFunction::H4]
    }

    pub fn name(&self) -> &str {
        match self {
            TargetFunction::H1 => "h1",
            TargetFunction::H2 => "h2",
            TargetFunction::H3 => "h3",
            TargetFunction::H4 => "h4",
            TargetFunction::Custom { name, .. } => name,
        }
    }

    pub fn scale(&self) -> Scale {
        match self {
            TargetFunction::H1 | TargetFunction::H3 => Scale::Data,
            TargetFunction::H2 | TargetFunction::H4 => Scale::Uniform,
            TargetFunction::Custom { scale, .. } => *scale,
        }
    }

    /// `ξ` for one row on the function's own scale.
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        match self {
            TargetFunction::H1 => top3_sum(row),
            TargetFunction::H2 => row.iter().copied().fold(f64::INFINITY, f64::min),
            TargetFunction::H3 => row.iter().sum::<f64>() / row.len() as f64,
            TargetFunction::H4 => row.iter().map(|u| 1.0 - u).sum::<f64>() / row.len() as f64,
            TargetFunction::Custom { eval, .. } => eval(row),
        }
    }
}

fn top3_sum(row: &[f64]) -> f64 {
    let mut top = [f64::NEG_INFINITY; 3];
    for &x in row {
        if x > top[2] {
            top[2] = x;
            if top[2] > top[1] {
                top.swap(1, 2);
                if top[1] > top[0] {
                    top.swap(0, 1);
                }
            }
        }
    }
    top.iter().filter(|x| x.is_finite()).sum()
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({:?})", self.name(), self.scale())
    }
}

impl fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h1" => Ok(TargetFunction::H1),
            "h2" => Ok(TargetFunction::H2),
            "h3" => Ok(TargetFunction::H3),
            "h4" => Ok(TargetFunction::H4),
            _ => Err(Error::InvalidInput(format!("unknown target function '{s}' (h1|h2|h3|h4)"))),
        }
    }
}

/// An estimated upper quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub alpha: f64,
    pub q_hat: f64,
    pub m: usize,
    /// `k` in "k-th largest bootstrap value".
    pub index_used: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_summary: Option<ModelSummary>,
}

/// `max(1, ⌊m·alpha⌋)`.
pub fn order_index(m: usize, alpha: f64) -> usize {
    ((m as f64 * alpha).floor() as usize).clamp(1, m.max(1))
}

/// The `⌊m·alpha⌋`-th largest of `values` (at least the maximum).
pub fn sample_quantile(values: &[f64], alpha: f64) -> Result<QuantileEstimate> {
    if values.is_empty() {
        return Err(Error::InvalidInput("no values to take a quantile of".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} not in (0,1)")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN among bootstrap values".into()));
    }
    let m = values.len();
    if (m as f64) * alpha < MIN_TAIL_DRAWS {
        log::warn!("m*alpha = {} < {MIN_TAIL_DRAWS}: quantile rests on very few draws", m as f64 * alpha);
    }
    let k = order_index(m, alpha);
    let mut buf = values.to_vec();
    let (_, q, _) = buf.select_nth_unstable_by(m - k, f64::total_cmp);
    Ok(QuantileEstimate { alpha, q_hat: *q, m, index_used: k, model_summary: None })
}

/// Mean absolute relative error of `estimates` against `truth`.
pub fn mare(estimates: &[f64], truth: f64) -> Result<f64> {
    if truth == 0.0 || !truth.is_finite() {
        return Err(Error::InvalidInput(format!("truth = {truth} must be finite and non-zero")));
    }
    if estimates.is_empty() {
        return Err(Error::InvalidInput("no estimates".into()));
    }
    Ok(estimates.iter().map(|q| ((q - truth) / truth).abs()).sum::<f64>() / estimates.len() as f64)
}

/// How uniform-scale target functions read bootstrap rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UniformEval {
    /// Directly on the copula draws.
    #[default]
    Direct,
    /// Through `F̂_t(F̂_t⁻¹(u))`, the empirical re-transform of the data-scale draw.
    Retransform,
}

impl FromStr for UniformEval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(UniformEval::Direct),
            "retransform" => Ok(UniformEval::Retransform),
            _ => Err(Error::InvalidInput(format!("unknown uniform evaluation '{s}' (direct|retransform)"))),
        }
    }
}

/// Choices made when turning copula draws into target-function values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub uniform_eval: UniformEval,
    pub marginal_inverse: MarginalInverse,
}

/// Draws `m` rows from `model` and evaluates every function on them.
///
/// With `marginals = None` the data are taken to have uniform marginals, so
/// both scales coincide. Returns one vector of `m` values per function.
pub fn bootstrap_values(
    model: &DVineModel,
    marginals: Option<&PseudoSample>,
    functions: &[TargetFunction],
    m: usize,
    rng: RngStream,
    options: BootstrapOptions,
) -> Result<Vec<Vec<f64>>> {
    let uniform_eval = options.uniform_eval;
    if let Some(ms) = marginals {
        if ms.p() != model.p() {
            return Err(Error::DimensionMismatch { expected: model.p(), got: ms.p() });
        }
    }
    let rows = sample_uniform_vine(model, m, rng).map_err(|e| e.context("sampling"))?;
    let need_data = marginals.is_some()
        && functions
            .iter()
            .any(|f| f.scale() == Scale::Data || uniform_eval == UniformEval::Retransform);
    let per_row: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|u| {
            let x = match marginals {
                Some(ms) if need_data => Some(to_data(ms, u, options.marginal_inverse)),
                _ => None,
            };
            let reu = match (marginals, &x, uniform_eval) {
                (Some(ms), Some(x), UniformEval::Retransform) => {
                    Some(x.iter().enumerate().map(|(j, &v)| ms.empirical_cdf(j, v)).collect::<Vec<_>>())
                }
                _ => None,
            };
            functions
                .iter()
                .map(|f| match f.scale() {
                    Scale::Data => f.evaluate(x.as_deref().unwrap_or(u)),
                    Scale::Uniform => f.evaluate(reu.as_deref().unwrap_or(u)),
                })
                .collect()
        })
        .collect();
    Ok((0..functions.len()).map(|k| per_row.iter().map(|r| r[k]).collect()).collect())
}

fn to_data(ms: &PseudoSample, u: &[f64], rule: MarginalInverse) -> Vec<f64> {
    u.iter()
        .zip(ms.sorted_columns())
        .map(|(&u, col)| rule.apply(col, u).expect("columns are non-empty"))
        .collect()
}

/// Quantile estimate from a given model, skipping the fit.
pub fn quantile_from_model(
    model: &DVineModel,
    marginals: Option<&PseudoSample>,
    function: &TargetFunction,
    alpha: f64,
    m: usize,
    rng: RngStream,
) -> Result<QuantileEstimate> {
    let values = bootstrap_values(model, marginals, std::slice::from_ref(function), m, rng, BootstrapOptions::default())?;
    let mut est = sample_quantile(&values[0], alpha)?;
    est.model_summary = Some(model.summary());
    Ok(est)
}

/// Rank-transform, fit, resample and read off the upper `alpha` quantile of
/// `function`.
pub fn estimate_extreme_quantile(
    data: &[Vec<f64>],
    function: &TargetFunction,
    alpha: f64,
    m: usize,
    policy: &CopulaPolicy,
    rng: RngStream,
) -> Result<QuantileEstimate> {
    estimate_with(data, function, alpha, m, policy, rng, BootstrapOptions::default())
}

/// As [`estimate_extreme_quantile`] with explicit bootstrap options.
pub fn estimate_with(
    data: &[Vec<f64>],
    function: &TargetFunction,
    alpha: f64,
    m: usize,
    policy: &CopulaPolicy,
    rng: RngStream,
    options: BootstrapOptions,
) -> Result<QuantileEstimate> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} not in (0, 0.5)")));
    }
    if m == 0 {
        return Err(Error::InvalidInput("bootstrap size m must be at least 1".into()));
    }
    let sample = pseudo_observations(data).map_err(|e| e.context("marginals"))?;
    let model = policy.fit(&sample).map_err(|e| e.context("fit"))?;
    let values = bootstrap_values(&model, Some(&sample), std::slice::from_ref(function), m, rng, options)?;
    let mut est = sample_quantile(&values[0], alpha)?;
    est.model_summary = Some(model.summary());
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicop::PairCopula;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn builtin_functions() {
        assert_eq!(TargetFunction::H3.evaluate(&[2.0; 10]), 2.0);
        assert_eq!(TargetFunction::H1.evaluate(&[1.0, 2.0, 3.0, 4.0, 5.0]), 12.0);
        assert_eq!(TargetFunction::H1.evaluate(&[5.0, 1.0, 4.0, 2.0, 3.0]), 12.0);
        assert!((TargetFunction::H4.evaluate(&[0.2, 0.4, 0.9]) - 0.5).abs() < 1e-15);
        assert_eq!(TargetFunction::H2.evaluate(&[0.2, 0.4, 0.9]), 0.2);
        assert_eq!(TargetFunction::H1.scale(), Scale::Data);
        assert_eq!(TargetFunction::H3.scale(), Scale::Data);
        assert_eq!(TargetFunction::H2.scale(), Scale::Uniform);
        assert_eq!(TargetFunction::H4.scale(), Scale::Uniform);
        assert_eq!("H4".parse::<TargetFunction>().unwrap().name(), "h4");
        assert!("h5".parse::<TargetFunction>().is_err());
    }

    proptest! {
        #[test]
        fn top3_matches_sort(row in prop::collection::vec(-1e6f64..1e6, 3..40)) {
            let mut s = row.clone();
            s.sort_by(|a, b| b.total_cmp(a));
            let expected = s[0] + s[1] + s[2];
            prop_assert!((TargetFunction::H1.evaluate(&row) - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn sample_quantile_examples() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let q = sample_quantile(&values, 0.05).unwrap();
        assert_eq!((q.q_hat, q.index_used, q.m), (96.0, 5, 100));
        assert_eq!(order_index(40_000, 0.0005), 20);
        assert_eq!(sample_quantile(&values, 0.01).unwrap().q_hat, 100.0);
        assert_eq!(sample_quantile(&values, 0.001).unwrap().q_hat, 100.0);
        assert!(sample_quantile(&[], 0.1).is_err());
        assert!(sample_quantile(&[1.0, f64::NAN], 0.1).is_err());
        assert!(sample_quantile(&[1.0], 0.0).is_err());
    }

    #[test]
    fn sample_quantile_matches_full_sort() {
        let mut rng = RngStream::new(40).rng();
        for _ in 0..1000 {
            let m = rng.random_range(1..3000);
            let values: Vec<f64> = (0..m).map(|_| (rng.random::<f64>() * 50.0).floor()).collect();
            let alpha = rng.random_range(1e-4..0.5);
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let k = ((m as f64 * alpha).floor() as usize).max(1);
            assert_eq!(sample_quantile(&values, alpha).unwrap().q_hat, sorted[k - 1]);
        }
    }

    proptest! {
        #[test]
        fn quantile_is_monotone_in_alpha(
            values in prop::collection::vec(-100f64..100.0, 1..500),
            a in 0.001f64..0.5,
            b in 0.001f64..0.5,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(sample_quantile(&values, lo).unwrap().q_hat >= sample_quantile(&values, hi).unwrap().q_hat);
        }
    }

    #[test]
    fn mare_examples() {
        assert!((mare(&[1.1, 0.9], 1.0).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(mare(&[3.0, 3.0], 3.0).unwrap(), 0.0);
        assert!(mare(&[1.0], 0.0).is_err());
        assert!(mare(&[], 1.0).is_err());
    }

    fn inverse_max() -> TargetFunction {
        TargetFunction::custom("inv_max", Scale::Data, |x| 1.0 / x.iter().copied().fold(0.0, f64::max))
    }

    #[test]
    fn gumbel_inverse_max_closed_form() {
        let model = DVineModel::markov(2, PairCopula::gumbel(2.0).unwrap()).unwrap();
        let est = quantile_from_model(&model, None, &inverse_max(), 1e-3, 1_000_000, RngStream::new(50)).unwrap();
        let truth = 1e-3f64.powf(-1.0 / 2f64.sqrt());
        assert!((truth - 132.0).abs() < 0.5);
        assert!((est.q_hat / truth - 1.0).abs() < 0.05, "{} vs {truth}", est.q_hat);
        assert_eq!(est.index_used, 1000);
    }

    #[test]
    fn clayton_inverse_max_closed_form() {
        let model = DVineModel::markov(2, PairCopula::clayton(1.0).unwrap()).unwrap();
        let est = quantile_from_model(&model, None, &inverse_max(), 1e-3, 1_000_000, RngStream::new(51)).unwrap();
        assert!((est.q_hat / 500.5 - 1.0).abs() < 0.05, "{}", est.q_hat);
    }

    fn ar_like_rows(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = RngStream::new(seed).rng();
        (0..n)
            .map(|_| {
                let mut x = 0.0;
                (0..p)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x = 0.7 * x + e;
                        x
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn constant_column_is_degenerate() {
        let mut rows = ar_like_rows(100, 3, 1);
        for r in rows.iter_mut() {
            r[1] = 7.0;
        }
        let err = estimate_extreme_quantile(&rows, &TargetFunction::H3, 0.01, 1000, &CopulaPolicy::copula_i(), RngStream::new(1))
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)), "{err}");
        assert!(err.to_string().contains("fit"));
    }

    #[test]
    fn pipeline_validates_inputs() {
        let rows = ar_like_rows(50, 3, 2);
        let policy = CopulaPolicy::copula_i();
        assert!(estimate_extreme_quantile(&rows, &TargetFunction::H3, 0.5, 100, &policy, RngStream::new(1)).is_err());
        assert!(estimate_extreme_quantile(&rows, &TargetFunction::H3, 0.0, 100, &policy, RngStream::new(1)).is_err());
        assert!(estimate_extreme_quantile(&rows, &TargetFunction::H3, 0.1, 0, &policy, RngStream::new(1)).is_err());
        assert!(estimate_extreme_quantile(&rows[..1], &TargetFunction::H3, 0.1, 10, &policy, RngStream::new(1)).is_err());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let rows = ar_like_rows(200, 5, 3);
        let policy = CopulaPolicy::copula_ii();
        for f in TargetFunction::builtins() {
            let a = estimate_extreme_quantile(&rows, &f, 0.01, 5000, &policy, RngStream::new(7)).unwrap();
            let b = estimate_extreme_quantile(&rows, &f, 0.01, 5000, &policy, RngStream::new(7)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.index_used, 50);
            assert_eq!(a.model_summary.as_ref().unwrap().m_trunc, 2);
        }
    }

    #[test]
    fn uniform_scale_functions_depend_only_on_ranks() {
        let rows = ar_like_rows(200, 4, 4);
        let warped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x.exp() * 3.0 + x.powi(3)).collect()).collect();
        let policy = CopulaPolicy::copula_ii();
        for f in [TargetFunction::H2, TargetFunction::H4] {
            for uniform_eval in [UniformEval::Direct, UniformEval::Retransform] {
                let opts = BootstrapOptions { uniform_eval, ..Default::default() };
                let a = estimate_with(&rows, &f, 0.01, 4000, &policy, RngStream::new(8), opts).unwrap();
                let b = estimate_with(&warped, &f, 0.01, 4000, &policy, RngStream::new(8), opts).unwrap();
                assert_eq!(a.q_hat, b.q_hat);
            }
        }
    }

    #[test]
    fn retransform_agrees_with_direct_on_the_support_grid() {
        // F̂(F̂⁻¹(u)) moves u to a neighbouring grid point, so the two
        // evaluations differ by less than one grid step 1/(n+1).
        let n = 150;
        let rows = ar_like_rows(n, 4, 5);
        let policy = CopulaPolicy::copula_i();
        for f in [TargetFunction::H2, TargetFunction::H4] {
            let direct = BootstrapOptions::default();
            let re = BootstrapOptions { uniform_eval: UniformEval::Retransform, ..direct };
            let a = estimate_with(&rows, &f, 0.05, 4000, &policy, RngStream::new(9), direct).unwrap();
            let b = estimate_with(&rows, &f, 0.05, 4000, &policy, RngStream::new(9), re).unwrap();
            assert!((a.q_hat - b.q_hat).abs() <= 1.0 / (n + 1) as f64 + 1e-12, "{f}: {} vs {}", a.q_hat, b.q_hat);
        }
    }

    #[test]
    fn data_scale_draws_stay_in_sample_range() {
        let rows = ar_like_rows(100, 3, 6);
        let ps = pseudo_observations(&rows).unwrap();
        let model = CopulaPolicy::copula_i().fit(&ps).unwrap();
        let opts = BootstrapOptions::default();
        let vals = bootstrap_values(&model, Some(&ps), &[TargetFunction::H3], 5000, RngStream::new(1), opts).unwrap();
        let lo: f64 = (0..3).map(|j| ps.sorted_column(j)[0]).sum::<f64>() / 3.0;
        let hi: f64 = (0..3).map(|j| *ps.sorted_column(j).last().unwrap()).sum::<f64>() / 3.0;
        assert!(vals[0].iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        let other = DVineModel::independence(4).unwrap();
        assert!(bootstrap_values(&other, Some(&ps), &[TargetFunction::H3], 10, RngStream::new(1), opts).is_err());
    }
}
