use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use vinequant::dvine::TreeSelection;
use vinequant::sim::{alpha_hat_table, run_experiment, AlphaHatConfig, ExperimentConfig, TruthCache};
use vinequant::{
    estimate_with, parametric_bootstrap_pvalue, pseudo_observations, sample_uniform_vine, BootstrapOptions,
    CopulaPolicy, DVineModel, Error, GofResult, MarginalInverse, ModelSummary, QuantileEstimate, RngStream,
    TargetFunction, UniformEval,
};

use crate::error::{CliError, CliResult};
use crate::io::{read_rows, write_json, write_rows, write_text};
use crate::manifest::{beside, RunManifest};

fn policy(name: &str, max_level: usize) -> CliResult<CopulaPolicy> {
    let mut p: CopulaPolicy = name.parse()?;
    if let TreeSelection::Aic { max_level: m } = &mut p.trees {
        *m = Some(max_level);
    }
    Ok(p)
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Numeric CSV, one observation per row.
    #[arg(long)]
    pub data: PathBuf,
    /// The first CSV line is data, not a header.
    #[arg(long)]
    pub no_header: bool,
}

impl DataArgs {
    fn load(&self, manifest: &mut RunManifest) -> CliResult<Vec<Vec<f64>>> {
        let rows = read_rows(&self.data, !self.no_header)?;
        manifest.input(&self.data)?;
        Ok(rows)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// gauss2 (Copula I), aic2 (Copula II) or aicfull (Copula III).
    #[arg(long, default_value = "aic2")]
    pub policy: String,
    /// Largest truncation level aicfull may choose.
    #[arg(long, default_value_t = 5)]
    pub max_level: usize,
    /// Where to write the fitted model as JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct PairReport {
    tree: usize,
    position: usize,
    family: &'static str,
    theta: Vec<f64>,
    loglik: f64,
}

#[derive(Serialize)]
struct FitReport {
    policy: String,
    n: usize,
    summary: ModelSummary,
    pairs: Vec<PairReport>,
}

pub fn fit(args: &FitArgs, manifest_path: Option<&Path>) -> CliResult<()> {
    let mut manifest = RunManifest::start("fit", args, None);
    let rows = args.data.load(&mut manifest)?;
    let policy = policy(&args.policy, args.max_level)?;
    let sample = pseudo_observations(&rows)?;
    let model = policy.fit(&sample)?;
    write_json(&model, Some(&args.out))?;
    let pairs = model
        .trees()
        .iter()
        .enumerate()
        .flat_map(|(j, tree)| {
            tree.iter().enumerate().map(move |(i, p)| PairReport {
                tree: j + 1,
                position: i + 1,
                family: p.copula.family().name(),
                theta: p.copula.params(),
                loglik: p.loglik,
            })
        })
        .collect();
    write_json(&FitReport { policy: policy.name(), n: sample.n(), summary: model.summary(), pairs }, None)?;
    manifest.finish(Some(&manifest_path.map_or_else(|| beside(&args.out), Path::to_path_buf)))
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Data the model was fitted to; its empirical marginals map draws back
    /// to the data scale. Not needed with --uniform-scale.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub no_header: bool,
    /// Number of rows to draw.
    #[arg(short = 'm', long, default_value_t = 10_000)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit the copula draws in (0,1) instead of data-scale rows.
    #[arg(long)]
    pub uniform_scale: bool,
    /// Inverse empirical CDF rule: midpoint or step.
    #[arg(long, default_value = "midpoint")]
    pub marginal_inverse: MarginalInverse,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_model(path: &Path, manifest: &mut RunManifest) -> CliResult<DVineModel> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    manifest.input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn sample(args: &SampleArgs, manifest_path: Option<&Path>) -> CliResult<()> {
    let mut manifest = RunManifest::start("sample", args, Some(args.seed));
    let model = load_model(&args.model, &mut manifest)?;
    let draws = sample_uniform_vine(&model, args.m, RngStream::new(args.seed))?;
    let rows = if args.uniform_scale {
        draws
    } else {
        let path = args.data.as_ref().ok_or_else(|| CliError::input("--data is required unless --uniform-scale is set"))?;
        let data = read_rows(path, !args.no_header)?;
        manifest.input(path)?;
        let marginals = pseudo_observations(&data)?;
        if marginals.p() != model.p() {
            return Err(Error::DimensionMismatch { expected: model.p(), got: marginals.p() }.into());
        }
        draws
            .iter()
            .map(|u| marginals.to_data_scale_with(u, args.marginal_inverse))
            .collect::<vinequant::Result<Vec<_>>>()?
    };
    write_rows(&rows, args.out.as_deref())?;
    manifest.finish(manifest_path.map(Path::to_path_buf).or_else(|| args.out.as_deref().map(beside)).as_deref())
}

#[derive(Debug, Args, Serialize)]
pub struct QuantileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Target function: h1 (sum of the top three), h2 (min of F(x)),
    /// h3 (mean) or h4 (mean of 1 - F(x)).
    #[arg(long)]
    pub h: String,
    /// Upper tail level.
    #[arg(long)]
    pub alpha: f64,
    /// Bootstrap size.
    #[arg(short = 'm', long, default_value_t = 10_000)]
    pub m: usize,
    #[arg(long, default_value = "gauss2")]
    pub policy: String,
    #[arg(long, default_value_t = 5)]
    pub max_level: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// How h2/h4 read bootstrap rows: direct or retransform.
    #[arg(long, default_value = "direct")]
    pub uniform_eval: UniformEval,
    #[arg(long, default_value = "midpoint")]
    pub marginal_inverse: MarginalInverse,
    /// JSON output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct QuantileReport {
    function: String,
    policy: String,
    seed: u64,
    #[serde(flatten)]
    estimate: QuantileEstimate,
}

pub fn quantile(args: &QuantileArgs, manifest_path: Option<&Path>) -> CliResult<()> {
    let mut manifest = RunManifest::start("quantile", args, Some(args.seed));
    let rows = args.data.load(&mut manifest)?;
    let function: TargetFunction = args.h.parse()?;
    let policy = policy(&args.policy, args.max_level)?;
    let options = BootstrapOptions { uniform_eval: args.uniform_eval, marginal_inverse: args.marginal_inverse };
    let estimate = estimate_with(&rows, &function, args.alpha, args.m, &policy, RngStream::new(args.seed), options)?;
    let report = QuantileReport { function: function.name().into(), policy: policy.name(), seed: args.seed, estimate };
    write_json(&report, args.out.as_deref())?;
    manifest.finish(manifest_path.map(Path::to_path_buf).or_else(|| args.out.as_deref().map(beside)).as_deref())
}

#[derive(Debug, Args, Serialize)]
pub struct GofArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "gauss2")]
    pub policy: String,
    #[arg(long, default_value_t = 5)]
    pub max_level: usize,
    /// Parametric bootstrap replicates.
    #[arg(long, default_value_t = 99)]
    pub b: usize,
    /// Monte Carlo draws behind the model copula CDF.
    #[arg(long, default_value_t = 1000)]
    pub n_mc: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct GofReport {
    policy: String,
    n: usize,
    seed: u64,
    #[serde(flatten)]
    result: GofResult,
}

pub fn gof(args: &GofArgs, manifest_path: Option<&Path>) -> CliResult<()> {
    let mut manifest = RunManifest::start("gof", args, Some(args.seed));
    let rows = args.data.load(&mut manifest)?;
    let policy = policy(&args.policy, args.max_level)?;
    let sample = pseudo_observations(&rows)?;
    let result = parametric_bootstrap_pvalue(&sample, &policy, args.b, args.n_mc, RngStream::new(args.seed))?;
    write_json(&GofReport { policy: policy.name(), n: sample.n(), seed: args.seed, result }, args.out.as_deref())?;
    manifest.finish(manifest_path.map(Path::to_path_buf).or_else(|| args.out.as_deref().map(beside)).as_deref())
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// TOML (or .json) file with an [experiment] and/or [alpha_hat] table.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for result tables and the manifest.
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
    /// Truth cache file; defaults to truth-cache.json inside --out-dir.
    #[arg(long)]
    pub truth_cache: Option<PathBuf>,
    /// Overrides the seed of every section.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Contents of a `simulate` config file.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub experiment: Option<ExperimentConfig>,
    pub alpha_hat: Option<AlphaHatConfig>,
}

impl SimulateConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let parsed: Result<Self, String> = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        let config = parsed.map_err(|e| CliError::input(format!("{}: {}", path.display(), e.trim_end())))?;
        if config.experiment.is_none() && config.alpha_hat.is_none() {
            return Err(CliError::input(format!("{}: needs an [experiment] or [alpha_hat] table", path.display())));
        }
        Ok(config)
    }
}

pub fn simulate(args: &SimulateArgs, manifest_path: Option<&Path>) -> CliResult<()> {
    let mut config = SimulateConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.experiment.iter_mut().for_each(|c| c.seed = seed);
        config.alpha_hat.iter_mut().for_each(|c| c.seed = seed);
    }
    if let Some(c) = &config.experiment {
        c.validate()?;
    }
    let seed = config.experiment.as_ref().map(|c| c.seed).or(config.alpha_hat.as_ref().map(|c| c.seed));
    let mut manifest = RunManifest::start("simulate", &config, seed);
    manifest.input(&args.config)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let out = |name: &str| args.out_dir.join(name);

    if let Some(c) = &config.alpha_hat {
        let rows = alpha_hat_table(c)?;
        let mut csv = String::from("law,n,alpha,alpha_hat,quantile\n");
        let mut text = format!("{:<12} {:>6} {:>8} {:>10}\n", "law", "n", "alpha", "alpha_hat");
        for r in &rows {
            let law = serde_json::to_value(r.law).expect("law serializes");
            let law = law.as_str().unwrap_or_default();
            csv += &format!("{law},{},{},{},{}\n", r.n, r.alpha, r.alpha_hat, r.quantile);
            text += &format!("{law:<12} {:>6} {:>8} {:>10.5}\n", r.n, r.alpha, r.alpha_hat);
        }
        write_text(&out("alpha_hat.csv"), &csv)?;
        write_text(&out("alpha_hat.txt"), &text)?;
        print!("{text}");
    }
    if let Some(c) = &config.experiment {
        let cache_path = args.truth_cache.clone().unwrap_or_else(|| out("truth-cache.json"));
        let mut cache = TruthCache::open(&cache_path)?;
        let result = run_experiment(c, &mut cache)?;
        cache.save()?;
        write_text(&out("experiment.csv"), &result.to_csv())?;
        write_text(&out("experiment.txt"), &result.to_text())?;
        print!("{}", result.to_text());
    }
    manifest.finish(Some(&manifest_path.map_or_else(|| out("manifest.json"), Path::to_path_buf)))
}
