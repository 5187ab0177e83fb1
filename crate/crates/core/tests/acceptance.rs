//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//! Set `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails and
//! `ACCEPTANCE_ONLY=N` to run a single criterion.

use std::time::Instant;

use rand::Rng;
use vinequant::bicop::Family;
use vinequant::dvine::{FamilyPolicy, TreeSelection};
use vinequant::gof::parametric_bootstrap_pvalue;
use vinequant::math::{kendall_tau, norm_quantile};
use vinequant::quantile::{quantile_from_model, sample_quantile};
use vinequant::sim::{alpha_hat_table, run_experiment, AlphaHatConfig, ExperimentConfig, ExperimentResult, GeneratorKind, Innovation, PolicyKind, TruthCache};
use vinequant::{
    pseudo_observations, sample_uniform_vine, CopulaPolicy, DVineModel, PairCopula, RngStream, Scale, TargetFunction,
};

const ALPHAS: [f64; 5] = [0.05, 0.01, 0.005, 0.001, 0.0005];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = run();
    println!(
        "criterion {id} [{}] {name}: {} ({:.0}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
    o.pass
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x / target - 1.0).abs() <= rel
}

/// Truncated exceedance probabilities for uniform and normal coordinates.
fn alpha_hat() -> Outcome {
    let published = [
        (GeneratorKind::IidUniform, 500, [0.04741, 0.00942, 0.00436, 0.00078, 0.00045]),
        (GeneratorKind::IidUniform, 1000, [0.04809, 0.00949, 0.00438, 0.00084, 0.00046]),
        (GeneratorKind::IidNormal, 500, [0.04360, 0.00829, 0.00401, 0.00075, 0.00038]),
        (GeneratorKind::IidNormal, 1000, [0.04645, 0.00896, 0.00439, 0.00083, 0.00043]),
    ];
    let config = AlphaHatConfig {
        laws: vec![GeneratorKind::IidUniform, GeneratorKind::IidNormal],
        n: vec![500, 1000],
        p: 20,
        alphas: ALPHAS.to_vec(),
        replications: 1_000_000,
        seed: 2024,
    };
    let rows = alpha_hat_table(&config).expect("alpha-hat run");
    let mut bad = Vec::new();
    for (law, n, values) in published {
        for (a, target) in ALPHAS.iter().zip(values) {
            let got = rows.iter().find(|r| r.law == law && r.n == n && r.alpha == *a).unwrap().alpha_hat;
            let tol = if *a >= 0.001 { 0.15 } else { 0.40 };
            if !within(got, target, tol) {
                bad.push(format!("{law:?} n={n} a={a}: {got:.5} vs {target}"));
            }
        }
    }
    Outcome { pass: bad.is_empty(), detail: if bad.is_empty() { "20 cells in band".into() } else { bad.join("; ") } }
}

/// Closed-form quantiles of 1/max for Gumbel and Clayton pairs.
fn analytic_oracles() -> Outcome {
    let inv_max = TargetFunction::custom("inv_max", Scale::Data, |x| 1.0 / x.iter().copied().fold(0.0, f64::max));
    let cases = [
        ("gumbel(2)", PairCopula::gumbel(2.0).unwrap(), 1e-3f64.powf(-1.0 / 2f64.sqrt())),
        ("clayton(1)", PairCopula::clayton(1.0).unwrap(), 500.5),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, pair, exact)) in cases.into_iter().enumerate() {
        let model = DVineModel::markov(2, pair).unwrap();
        let est = quantile_from_model(&model, None, &inv_max, 1e-3, 1_000_000, RngStream::new(70 + i as u64)).unwrap();
        let ok = within(est.q_hat, exact, 0.05);
        pass &= ok;
        parts.push(format!("{name} {:.1} vs {exact:.1}", est.q_hat));
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn desk_config(innovation: Innovation, policy: PolicyKind, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n: 500,
        p: 20,
        innovation,
        policies: vec![policy, PolicyKind::SampleQuantile],
        alphas: ALPHAS.to_vec(),
        m: 10_000,
        replications: 50,
        seed,
        ..ExperimentConfig::default()
    }
}

fn truth_cache() -> TruthCache {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR"));
    TruthCache::open(dir.join("acceptance-truth.json")).expect("truth cache")
}

fn table1_orderings(result: &ExperimentResult) -> Vec<String> {
    let cop = |f: &str, a: f64| result.mare(f, PolicyKind::CopulaI, a).unwrap();
    let mut bad = Vec::new();
    for a in ALPHAS {
        let worst_uniform = cop("h2", a).max(cop("h4", a));
        let best_data = cop("h1", a).min(cop("h3", a));
        if worst_uniform >= best_data {
            bad.push(format!("a={a}: h2/h4 not below h1/h3 ({worst_uniform:.4} vs {best_data:.4})"));
        }
        for f in ["h2", "h4"] {
            if let Some(base) = result.mare(f, PolicyKind::SampleQuantile, a) {
                if cop(f, a) >= base {
                    bad.push(format!("{f} a={a}: copula {:.4} not below sample quantile {base:.4}", cop(f, a)));
                }
            }
        }
    }
    bad
}

/// Desk-scale Table 1: normal innovations, Copula I.
fn table1() -> Outcome {
    let published = [
        ("h1", [0.0161, 0.0259]),
        ("h2", [0.0082, 0.0103]),
        ("h3", [0.0260, 0.0216]),
        ("h4", [0.0028, 0.0035]),
    ];
    let config = desk_config(Innovation::Normal, PolicyKind::CopulaI, 1);
    let result = run_experiment(&config, &mut truth_cache()).expect("table 1 run");
    println!("{}", result.to_text());
    let cop = |f: &str, a: f64| result.mare(f, PolicyKind::CopulaI, a).unwrap();
    let mut bad = Vec::new();
    for (f, vals) in published {
        for (a, target) in [0.05, 0.01].iter().zip(vals) {
            let got = cop(f, *a);
            if !(got >= 0.5 * target && got <= 2.0 * target) {
                bad.push(format!("{f} a={a}: {got:.4} vs published {target}"));
            }
        }
    }
    bad.extend(table1_orderings(&result));
    let rule = format!("{:?} marginal inverse", config.marginal_inverse).to_lowercase();
    if bad.is_empty() {
        return Outcome { pass: true, detail: format!("bands and orderings hold ({rule})") };
    }
    // Diagnostic only: the same replications with the bootstrap size used in
    // the published full-scale runs. The verdict stays with m = 10000.
    let wide = ExperimentConfig { m: 40_000, ..config };
    let wide = run_experiment(&wide, &mut truth_cache()).expect("table 1 diagnostic run");
    println!("{}", wide.to_text());
    let at_40k = match table1_orderings(&wide) {
        v if v.is_empty() => "all orderings hold at m = 40000".to_string(),
        v => format!("at m = 40000: {}", v.join("; ")),
    };
    Outcome { pass: false, detail: format!("{} ({rule}; {at_40k})", bad.join("; ")) }
}

/// Desk-scale Table 2: t4 innovations, Copula II.
fn table2() -> Outcome {
    let result = run_experiment(&desk_config(Innovation::T4, PolicyKind::CopulaII, 2), &mut truth_cache())
        .expect("table 2 run");
    println!("{}", result.to_text());
    let cop = |f: &str, a: f64| result.mare(f, PolicyKind::CopulaII, a).unwrap();
    let ratio = cop("h1", 0.001) / cop("h1", 0.05);
    let h4_max = ALPHAS.iter().map(|&a| cop("h4", a)).fold(0.0, f64::max);
    Outcome {
        pass: ratio >= 3.0 && h4_max < 0.02,
        detail: format!("MARE(h1,.001)/MARE(h1,.05) = {ratio:.2} (need >= 3), max h4 MARE = {h4_max:.4} (need < .02)"),
    }
}

/// Condensed property checks over the public API.
fn properties() -> Outcome {
    let mut bad = Vec::new();
    let mut rng = RngStream::new(5).rng();
    let grids: Vec<PairCopula> = Family::ALL
        .iter()
        .filter(|f| **f != Family::Independence)
        .flat_map(|&f| {
            let params: [f64; 5] = match f {
                Family::Gaussian => [-0.8, -0.4, 0.1, 0.5, 0.8],
                Family::Frank => [-8.0, -2.0, 1.0, 4.0, 10.0],
                Family::Gumbel | Family::Gumbel90 | Family::Gumbel180 | Family::Gumbel270 => [1.0, 1.3, 1.8, 2.5, 4.0],
                _ => [0.3, 0.8, 1.5, 2.5, 4.0],
            };
            params.map(move |t| PairCopula::new(f, t).unwrap())
        })
        .collect();
    let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let mut worst_rt = 0.0f64;
    let mut worst_fd = 0.0f64;
    for c in &grids {
        for &u in &grid {
            for &v in &grid {
                let w = c.h_function(u, v).unwrap();
                worst_rt = worst_rt.max((c.inv_h(w, v).unwrap() - u).abs());
                let eps = 1e-5;
                let fd = (c.h_function(u + eps, v).unwrap() - c.h_function(u - eps, v).unwrap()) / (2.0 * eps);
                let d = c.density(u, v).unwrap();
                worst_fd = worst_fd.max((fd - d).abs() / d.max(1e-3));
            }
        }
    }
    if worst_rt >= 1e-8 {
        bad.push(format!("h/inv-h roundtrip {worst_rt:.2e}"));
    }
    if worst_fd >= 1e-4 {
        bad.push(format!("density vs dh/du {worst_fd:.2e}"));
    }

    for p in [2usize, 3, 4] {
        let trees = (1..p).map(|j| (0..p - j).map(|k| grids[(7 * p + 3 * j + k) % grids.len()]).collect()).collect();
        let model = DVineModel::new(p, trees).unwrap();
        let draws = 400_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let u: Vec<f64> = (0..p).map(|_| rng.random_range(1e-12..1.0)).collect();
            let c = model.log_density(&u).unwrap().exp();
            s += c;
            s2 += c * c;
        }
        let mean = s / draws as f64;
        let se = ((s2 / draws as f64 - mean * mean) / draws as f64).sqrt();
        if (mean - 1.0).abs() > 3.0 * se {
            bad.push(format!("p={p} density integral {mean:.4} (se {se:.4})"));
        }
        let rows = sample_uniform_vine(&model, 100_000, RngStream::new(p as u64)).unwrap();
        for j in 0..p {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let n = col.len() as f64;
            let d = col.iter().enumerate().map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n)).fold(0.0, f64::max);
            // KS p > 0.01 corresponds to sqrt(n) D < 1.628.
            if n.sqrt() * d >= 1.628 {
                bad.push(format!("p={p} coordinate {j} KS distance {d:.4}"));
            }
        }
    }

    let truth = PairCopula::new(Family::Clayton, 2.0).unwrap();
    let model = DVineModel::markov(2, truth).unwrap();
    let rows = sample_uniform_vine(&model, 2000, RngStream::new(9)).unwrap();
    let sample = pseudo_observations(&rows).unwrap();
    let fit = vinequant::bicop::fit_pair(sample.column(0), sample.column(1), Family::Clayton).unwrap();
    let tau = kendall_tau(sample.column(0), sample.column(1));
    if !(fit.copula.theta() > 1.7 && fit.copula.theta() < 2.3) || (tau - 0.5).abs() > 0.03 {
        bad.push(format!("clayton fit {} tau {tau:.3}", fit.copula.theta()));
    }

    for _ in 0..1000 {
        let m = rng.random_range(1..2000);
        let values: Vec<f64> = (0..m).map(|_| norm_quantile(rng.random_range(0.001..0.999))).collect();
        let alpha = rng.random_range(1e-4..0.5);
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let k = ((m as f64 * alpha).floor() as usize).max(1);
        if sample_quantile(&values, alpha).unwrap().q_hat != sorted[k - 1] {
            bad.push("sample_quantile disagrees with full sort".into());
            break;
        }
    }
    Outcome { pass: bad.is_empty(), detail: if bad.is_empty() { "all suites hold".into() } else { bad.join("; ") } }
}

/// Bootstrap goodness-of-fit size and power.
fn gof() -> Outcome {
    let truth = DVineModel::new(
        3,
        vec![
            vec![PairCopula::gaussian(0.6).unwrap(), PairCopula::gaussian(0.4).unwrap()],
            vec![PairCopula::gaussian(0.3).unwrap()],
        ],
    )
    .unwrap();
    let trials = 100;
    let mut pvalues = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let rows = sample_uniform_vine(&truth, 200, RngStream::with_stream(600, t)).unwrap();
        let sample = pseudo_observations(&rows).unwrap();
        let r = parametric_bootstrap_pvalue(&sample, &CopulaPolicy::copula_i(), 99, 1000, RngStream::with_stream(601, t))
            .unwrap();
        pvalues.push(r.p_value_tn);
    }
    let size = pvalues.iter().filter(|&&p| p <= 0.05).count() as f64 / trials as f64;
    pvalues.sort_by(f64::total_cmp);
    let ks = pvalues
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i as f64 + 1.0) / trials as f64 - p).max(p - i as f64 / trials as f64))
        .fold(0.0, f64::max);

    let strong = DVineModel::markov(2, PairCopula::gaussian(0.9).unwrap()).unwrap();
    let independence = CopulaPolicy { families: FamilyPolicy::Fixed(Family::Independence), trees: TreeSelection::Fixed(1) };
    let power_trials = 40;
    let mut rejected = 0;
    for t in 0..power_trials as u64 {
        let rows = sample_uniform_vine(&strong, 500, RngStream::with_stream(700, t)).unwrap();
        let sample = pseudo_observations(&rows).unwrap();
        let r = parametric_bootstrap_pvalue(&sample, &independence, 99, 1000, RngStream::with_stream(701, t)).unwrap();
        rejected += (r.p_value_tn <= 0.05) as usize;
    }
    let power = rejected as f64 / power_trials as f64;
    Outcome {
        pass: (0.01..=0.12).contains(&size) && ks < 0.2 && power >= 0.95,
        detail: format!("size {size:.2} (need [.01,.12]), p-value KS {ks:.3} (need < .2), power {power:.2} (need >= .95)"),
    }
}

fn main() {
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("truncated exceedance probabilities", alpha_hat),
        ("closed-form quantile oracles", analytic_oracles),
        ("Table 1 desk reproduction", table1),
        ("Table 2 heavy-tail behaviour", table2),
        ("property suites", properties),
        ("goodness-of-fit size and power", gof),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        failed += (!report(i + 1, name, f)) as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    } else {
        println!("all acceptance criteria passed");
    }
}
