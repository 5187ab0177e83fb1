use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alpha_hat::default_alphas;
use super::truth::{evaluate_all, true_quantiles, TruthCache, STAND_IN_DRAWS};
use super::{Generator, GeneratorKind, Innovation, MarginalCdf};
use crate::dvine::CopulaPolicy;
use crate::error::{Error, Result};
use crate::marginals::{pseudo_observations, MarginalInverse};
use crate::quantile::{
    bootstrap_values, mare, order_index, sample_quantile, BootstrapOptions, TargetFunction, UniformEval,
};
use crate::rng::RngStream;

/// Largest tolerated fraction of failed replications per policy.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "copula_i", alias = "gauss2")]
    CopulaI,
    #[serde(rename = "copula_ii", alias = "aic2")]
    CopulaII,
    #[serde(rename = "copula_iii", alias = "aicfull")]
    CopulaIII,
    #[serde(rename = "sample_quantile", alias = "sample-quantile")]
    SampleQuantile,
}

impl PolicyKind {
    fn copula(self, max_level: Option<usize>) -> Option<CopulaPolicy> {
        match self {
            PolicyKind::CopulaI => Some(CopulaPolicy::copula_i()),
            PolicyKind::CopulaII => Some(CopulaPolicy::copula_ii()),
            PolicyKind::CopulaIII => Some(CopulaPolicy::copula_iii(max_level)),
            PolicyKind::SampleQuantile => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::CopulaI => "Copula I",
            PolicyKind::CopulaII => "Copula II",
            PolicyKind::CopulaIII => "Copula III",
            PolicyKind::SampleQuantile => "sample quantile",
        })
    }
}

/// One MARE experiment: data law, estimators, tail levels and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_innovation")]
    pub innovation: Innovation,
    #[serde(default = "default_generator")]
    pub generator: GeneratorKind,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default = "default_functions")]
    pub functions: Vec<String>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Defaults to 500 000, or 2 000 000 when some alpha is below 0.001.
    #[serde(default)]
    pub truth_mc_size: Option<usize>,
    /// Largest truncation level Copula III may choose.
    #[serde(default = "default_max_level")]
    pub max_level: Option<usize>,
    /// The sample-quantile baseline is reported only where `n·alpha` reaches
    /// this value.
    #[serde(default = "default_baseline_min_tail")]
    pub baseline_min_tail: f64,
    #[serde(default)]
    pub uniform_eval: UniformEval,
    #[serde(default)]
    pub marginal_inverse: MarginalInverse,
    #[serde(default)]
    pub seed: u64,
}

fn default_n() -> usize {
    500
}
fn default_p() -> usize {
    20
}
fn default_innovation() -> Innovation {
    Innovation::Normal
}
fn default_generator() -> GeneratorKind {
    GeneratorKind::Ar2
}
fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::CopulaI, PolicyKind::CopulaII, PolicyKind::CopulaIII, PolicyKind::SampleQuantile]
}
fn default_functions() -> Vec<String> {
    ["h1", "h2", "h3", "h4"].map(String::from).to_vec()
}
fn default_m() -> usize {
    10_000
}
fn default_replications() -> usize {
    50
}
fn default_max_level() -> Option<usize> {
    Some(5)
}
fn default_baseline_min_tail() -> f64 {
    0.5
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn truth_size(&self) -> usize {
        self.truth_mc_size.unwrap_or_else(|| {
            if self.alphas.iter().all(|&a| a >= 0.001) {
                500_000
            } else {
                2_000_000
            }
        })
    }

    pub fn generator(&self) -> Result<Generator> {
        Generator::new(self.generator, self.p, self.innovation, self.theta)
    }

    pub fn target_functions(&self) -> Result<Vec<TargetFunction>> {
        self.functions.iter().map(|f| f.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if self.m == 0 || self.replications == 0 {
            return bad("m and replications must be at least 1".into());
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a < 0.5)) {
            return bad(format!("alphas {:?} must be non-empty and inside (0, 0.5)", self.alphas));
        }
        if self.policies.is_empty() || self.functions.is_empty() {
            return bad("need at least one policy and one function".into());
        }
        let amin = self.alphas.iter().copied().fold(1.0, f64::min);
        if (self.truth_size() as f64) < 10.0 / amin {
            return bad(format!("truth_mc_size {} below 10/alpha = {}", self.truth_size(), 10.0 / amin));
        }
        self.generator()?;
        self.target_functions()?;
        Ok(())
    }
}

/// One cell of the MARE table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub function: String,
    pub policy: PolicyKind,
    pub alpha: f64,
    /// `None` where the estimator is unavailable ("n/a").
    pub mare: Option<f64>,
    pub truth: f64,
    pub n_fail: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<TableRow>,
}

impl ExperimentResult {
    pub fn cell(&self, function: &str, policy: PolicyKind, alpha: f64) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.function == function && r.policy == policy && r.alpha == alpha)
    }

    pub fn mare(&self, function: &str, policy: PolicyKind, alpha: f64) -> Option<f64> {
        self.cell(function, policy, alpha).and_then(|r| r.mare)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("function,policy,alpha,mare,n_fail\n");
        for r in &self.rows {
            let mare = r.mare.map_or("n/a".to_string(), |m| format!("{m:.6}"));
            let _ = writeln!(s, "{},{},{},{},{}", r.function, r.policy, r.alpha, mare, r.n_fail);
        }
        s
    }

    /// Function × policy rows, one column per alpha.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "MARE, n = {}, p = {}, {:?} innovations, {} replications, m = {}\n",
            c.n, c.p, c.innovation, c.replications, c.m
        );
        let _ = write!(s, "{:<10}{:<17}", "function", "model");
        for a in &c.alphas {
            let _ = write!(s, "{:>10}", format!("a={a}"));
        }
        s.push('\n');
        for f in &c.functions {
            for (i, p) in c.policies.iter().enumerate() {
                let _ = write!(s, "{:<10}{:<17}", if i == 0 { f.as_str() } else { "" }, p.to_string());
                for &a in &c.alphas {
                    let cell = self.mare(f, *p, a).map_or("n/a".to_string(), |m| format!("{m:.4}"));
                    let _ = write!(s, "{cell:>10}");
                }
                s.push('\n');
            }
        }
        s
    }
}

/// `[policy][function][alpha]` estimates of one replication; `None` entries
/// are unavailable baseline cells.
type RepEstimates = Vec<Result<Vec<Vec<Option<f64>>>>>;

fn replicate(
    config: &ExperimentConfig,
    gen: &Generator,
    marginal: &MarginalCdf,
    functions: &[TargetFunction],
    stream: RngStream,
) -> RepEstimates {
    let data = match gen.generate(config.n, stream.substream(0)) {
        Ok(d) => d,
        Err(e) => return config.policies.iter().map(|_| Err(e.clone())).collect(),
    };
    let sample = pseudo_observations(&data);
    config
        .policies
        .iter()
        .map(|kind| match kind.copula(config.max_level) {
            Some(policy) => {
                let sample = sample.as_ref().map_err(Clone::clone)?;
                let model = policy.fit(sample)?;
                // Common bootstrap stream across policies.
                let opts = BootstrapOptions { uniform_eval: config.uniform_eval, marginal_inverse: config.marginal_inverse };
                let values = bootstrap_values(&model, Some(sample), functions, config.m, stream.substream(1), opts)?;
                values
                    .iter()
                    .map(|v| config.alphas.iter().map(|&a| sample_quantile(v, a).map(|q| Some(q.q_hat))).collect())
                    .collect()
            }
            None => {
                let per_row: Vec<Vec<f64>> = data.iter().map(|r| evaluate_all(functions, marginal, r)).collect();
                (0..functions.len())
                    .map(|k| {
                        let mut v: Vec<f64> = per_row.iter().map(|r| r[k]).collect();
                        v.sort_by(|a, b| b.total_cmp(a));
                        config
                            .alphas
                            .iter()
                            .map(|&a| {
                                let tail = config.n as f64 * a;
                                Ok((tail >= config.baseline_min_tail).then(|| v[order_index(v.len(), a) - 1]))
                            })
                            .collect()
                    })
                    .collect()
            }
        })
        .collect()
}

/// Runs the replications of `config` and tabulates MARE against Monte Carlo
/// truths (looked up in, or added to, `cache`).
pub fn run_experiment(config: &ExperimentConfig, cache: &mut TruthCache) -> Result<ExperimentResult> {
    config.validate()?;
    let gen = config.generator()?;
    let functions = config.target_functions()?;
    let root = RngStream::new(config.seed);
    let marginal = gen.marginal_cdf(STAND_IN_DRAWS, root.substream(1))?;

    let size = config.truth_size();
    let truth_stream = root.substream(2);
    let keys: Vec<Vec<String>> = functions
        .iter()
        .map(|f| config.alphas.iter().map(|&a| TruthCache::key(&gen, f.name(), a, size, truth_stream)).collect())
        .collect();
    if keys.iter().flatten().any(|k| cache.get(k).is_none()) {
        log::info!("computing truth from {size} draws");
        let t = true_quantiles(&gen, &marginal, &functions, &config.alphas, size, truth_stream)?;
        for (kf, tf) in keys.iter().zip(t) {
            for (k, v) in kf.iter().zip(tf) {
                cache.insert(k.clone(), v);
            }
        }
        cache.save()?;
    }
    let truth: Vec<Vec<f64>> =
        keys.iter().map(|kf| kf.iter().map(|k| cache.get(k).expect("just filled")).collect()).collect();

    let reps_stream = root.substream(3);
    let outcomes: Vec<RepEstimates> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let out = replicate(config, &gen, &marginal, &functions, reps_stream.substream(r));
            log::debug!("replication {} done", r + 1);
            out
        })
        .collect();

    let mut rows = Vec::new();
    for (pi, kind) in config.policies.iter().enumerate() {
        let mut ok = Vec::new();
        let mut last_err = None;
        for rep in &outcomes {
            match &rep[pi] {
                Ok(est) => ok.push(est),
                Err(e) => last_err = Some(e.clone()),
            }
        }
        let n_fail = config.replications - ok.len();
        if n_fail as f64 > MAX_FAILURE_RATE * config.replications as f64 {
            let e = last_err.expect("failures imply an error");
            return Err(e.context(format!("{kind}: {n_fail} of {} replications failed", config.replications)));
        }
        for (fi, f) in functions.iter().enumerate() {
            for (ai, &alpha) in config.alphas.iter().enumerate() {
                let est: Option<Vec<f64>> = ok.iter().map(|e| e[fi][ai]).collect();
                let mare = match est {
                    Some(v) if !v.is_empty() => Some(mare(&v, truth[fi][ai])?),
                    _ => None,
                };
                rows.push(TableRow {
                    function: f.name().to_string(),
                    policy: *kind,
                    alpha,
                    mare,
                    truth: truth[fi][ai],
                    n_fail,
                });
            }
        }
    }
    Ok(ExperimentResult { config: config.clone(), rows })
}
