//! Acceptance criteria 1-10. Every test prints one `criterion N: PASS|FAIL`
//! line with its statistics, then asserts.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weakpairs::data::{NoiseConfig, TaskGenerator, TaskSpec};
use weakpairs::estimators::{evaluate, PairLosses};
use weakpairs::pairs::feasible_region_check;
use weakpairs::trainer::{run_experiment, sweep, Annotator, DataSource, GeneratorSource, SweepAxis, TrainConfig};
use weakpairs::verify::{
    all_kinds, bias_non_increasing, corrected_bias, grad_check, mc_unbiasedness_many, mean_stderr, variance_profile,
};
use weakpairs::{ClassPrior, Correction, EstimatorKind, EstimatorSpec, LossKind, Mlp64};

fn report(n: u32, pass: bool, elapsed: Duration, budget: Option<Duration>, detail: &str) {
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let ok = pass && in_time;
    let limit = budget.map(|b| format!(" (limit {:.0?})", b)).unwrap_or_default();
    println!("criterion {n}: {} in {elapsed:.2?}{limit}; {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n}: {detail}");
    assert!(in_time, "criterion {n}: took {elapsed:?}{limit}");
}

fn fixed_model() -> Mlp64 {
    Mlp64::new(2, &[16, 16], 0xACCE97).unwrap()
}

/// Every uncorrected estimator, with several mixing weights.
fn uncorrected_family() -> Vec<EstimatorSpec> {
    let mut v = vec![EstimatorSpec::sconf(), EstimatorSpec::confdiff(), EstimatorSpec::scd()];
    for g in [0.0, 0.25, 0.5, 0.75, 1.0] {
        v.push(EstimatorSpec::convex(g));
    }
    for l in [0.0, 0.1, 0.25, 0.75, 0.9, 1.0] {
        v.push(EstimatorSpec::scd_lambda(l));
    }
    v
}

#[test]
fn criterion_01_constant_loss_calibration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let specs = uncorrected_family();
    let mut worst = vec![0.0f64; specs.len()];
    for _ in 0..100 {
        let pi = rng.random_range(0.05..0.95);
        let n = rng.random_range(1..=300);
        let k = rng.random_range(0.1..10.0);
        let data = TaskGenerator::new(TaskSpec::canonical(pi), rng.random()).unwrap().annotate_pairs_exact(n).unwrap();
        let prior = ClassPrior::new(pi).unwrap();
        let losses = PairLosses::constant(n, k);
        for (i, s) in specs.iter().enumerate() {
            let v = evaluate(s, &data, &prior, &losses).unwrap();
            worst[i] = worst[i].max((v - k).abs());
        }
    }
    let failing: Vec<String> =
        specs.iter().zip(&worst).filter(|(_, &w)| w > 1e-12).map(|(s, w)| format!("{} residual {w:.3e}", s.label())).collect();
    let detail = if failing.is_empty() {
        format!("max residual {:.3e} over {} estimators", worst.iter().cloned().fold(0.0, f64::max), specs.len())
    } else {
        format!("residual > 1e-12 for: {}", failing.join(", "))
    };
    report(1, failing.is_empty(), start.elapsed(), Some(Duration::from_secs(1)), &detail);
}

#[test]
fn criterion_02_monte_carlo_unbiasedness() {
    let start = Instant::now();
    let model = fixed_model();
    let mut lines = Vec::new();
    let mut worst: f64 = 0.0;
    let mut n_tests = 0;
    for (i, pi) in [0.2, 0.5, 0.8].into_iter().enumerate() {
        let gen = TaskGenerator::new(TaskSpec::canonical(pi), 200 + i as u64).unwrap();
        let specs: Vec<EstimatorSpec> = uncorrected_family()
            .into_iter()
            .filter(|s| pi != 0.5 || matches!(s.kind, EstimatorKind::ConfDiff | EstimatorKind::Scd | EstimatorKind::ScdLambda))
            .collect();
        for r in mc_unbiasedness_many(&gen, &model, &LossKind::Logistic, &specs, 200, 2000, 4.0).unwrap() {
            worst = worst.max(r.z.abs());
            n_tests += 1;
            if !r.pass {
                lines.push(format!("pi={pi} {} z={:.2}", r.label, r.z));
            }
        }
    }
    let detail = format!("{n_tests} estimator/prior tests, max |z| = {worst:.2}; failing: [{}]", lines.join(", "));
    report(2, lines.is_empty(), start.elapsed(), Some(Duration::from_secs(120)), &detail);
}

#[test]
fn criterion_03_minimum_variance() {
    let start = Instant::now();
    let gen = TaskGenerator::new(TaskSpec::canonical(0.2), 300).unwrap();
    let lambdas = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
    let p = variance_profile(&gen, &fixed_model(), &LossKind::Logistic, &lambdas, 200, 2000, 1000).unwrap();
    let minimum = p.minimum_at_half(3.0);
    let symmetric = p.symmetric(3.0);
    let rows: Vec<String> = p.rows.iter().map(|r| format!("{}:{:.3e}±{:.1e}", r.lambda, r.variance, r.stderr)).collect();
    let detail = format!("minimum at 1/2: {minimum}, symmetric: {symmetric}; {}", rows.join(" "));
    report(3, minimum && symmetric, start.elapsed(), Some(Duration::from_secs(120)), &detail);
}

#[test]
fn criterion_04_gradient_fidelity() {
    let start = Instant::now();
    let mut gen = TaskGenerator::new(TaskSpec::canonical(0.3), 400).unwrap();
    let data = gen.annotate_pairs_exact(32).unwrap();
    let model = Mlp64::new(2, &[8, 8, 8], 401).unwrap();
    let mut worst: f64 = 0.0;
    let mut min_checked = usize::MAX;
    let mut lines = Vec::new();
    for spec in all_kinds() {
        let r = grad_check(&model, &data, &gen.prior(), &spec, &LossKind::Logistic, 1e-5, 402).unwrap();
        worst = worst.max(r.max_rel_error);
        min_checked = min_checked.min(r.n_checked);
        lines.push(format!("{} {:.1e} ({} checked)", r.label, r.max_rel_error, r.n_checked));
    }
    let pass = worst <= 1e-4 && min_checked >= 100;
    let detail = format!("{} params, max rel error {worst:.2e}, min checked {min_checked}; {}", model.num_params(), lines.join(", "));
    report(4, pass, start.elapsed(), Some(Duration::from_secs(60)), &detail);
}

#[test]
fn criterion_05_corrected_bias_sign_and_trend() {
    let start = Instant::now();
    let gen = TaskGenerator::new(TaskSpec::canonical(0.2), 500).unwrap();
    let model = fixed_model();
    let reports: Vec<_> =
        [50, 200, 800].iter().map(|&n| corrected_bias(&gen, &model, &LossKind::Logistic, Correction::Abs, n, 2000, 4.0).unwrap()).collect();
    let nonnegative = reports.iter().all(|r| r.nonnegative);
    let trend = bias_non_increasing(&reports, 3.0);
    let rows: Vec<String> = reports
        .iter()
        .map(|r| format!("n={}: z={:.2} bias={:.3e}±{:.1e}", r.n_pairs, r.vs_oracle.z, r.paired_bias, r.paired_stderr))
        .collect();
    let detail = format!("nonnegative: {nonnegative}, non-increasing: {trend}; {}", rows.join(", "));
    report(5, nonnegative && trend, start.elapsed(), None, &detail);
}

fn generator_source(pi: f64, n_pairs: usize, n_test: usize) -> DataSource {
    DataSource::Generator(GeneratorSource { task: TaskSpec::canonical(pi), n_pairs, n_test, annotator: Annotator::Exact })
}

#[test]
fn criterion_06_overfitting_signature() {
    let start = Instant::now();
    let src = generator_source(0.2, 200, 5000);
    let base = TrainConfig { epochs: 100, batch_pairs: 32, eval_every: 100, hidden: vec![300, 300, 300], seed: 2024, ..TrainConfig::default() };
    let clean = NoiseConfig::clean();
    let none = run_experiment(&TrainConfig { estimator: EstimatorSpec::scd(), ..base.clone() }, &src, 5, 1.0, &clean).unwrap();
    let abs = run_experiment(&TrainConfig { estimator: EstimatorSpec::corrected_scd(Correction::Abs), ..base }, &src, 5, 1.0, &clean).unwrap();
    let negative = none.runs.iter().filter(|r| r.first_negative_epoch.is_some()).count();
    let abs_min = abs.runs.iter().flat_map(|r| r.min_batch_risk.iter().copied()).fold(f64::INFINITY, f64::min);
    let pass = negative >= 4 && abs_min >= -1e-12 && abs.mean >= none.mean;
    let detail = format!(
        "SCD-None negative in {negative}/5 seeds (epochs {:?}); SCD-Abs min batch risk {abs_min:.3e}; mean accuracy Abs {:.4} vs None {:.4}",
        none.runs.iter().map(|r| r.first_negative_epoch).collect::<Vec<_>>(),
        abs.mean,
        none.mean
    );
    report(6, pass, start.elapsed(), Some(Duration::from_secs(600)), &detail);
}

#[test]
fn criterion_07_near_bayes() {
    let start = Instant::now();
    let task = TaskSpec::canonical(0.5);
    let bayes = task.bayes_accuracy();
    let src = generator_source(0.5, 2000, 5000);
    let cfg = TrainConfig { epochs: 30, batch_pairs: 64, eval_every: 30, hidden: vec![100, 100, 100], seed: 7, ..TrainConfig::default() };
    let r = run_experiment(&cfg, &src, 3, 1.0, &NoiseConfig::clean()).unwrap();
    let accs = r.accuracies();
    let worst = accs.iter().cloned().fold(f64::INFINITY, f64::min);
    let detail = format!("Bayes {bayes:.4}, threshold {:.4}, per-seed accuracy {accs:.4?}", bayes - 0.02);
    report(7, worst >= bayes - 0.02, start.elapsed(), Some(Duration::from_secs(120)), &detail);
}

#[test]
fn criterion_08_robustness_grid() {
    let start = Instant::now();
    let src = generator_source(0.2, 1000, 5000);
    let cfg = TrainConfig { epochs: 20, batch_pairs: 64, eval_every: 20, hidden: vec![64, 64, 64], seed: 8, ..TrainConfig::default() };
    let axis = SweepAxis::Noise { epsilons: vec![0.8, 0.9, 1.0, 1.1, 1.2], sigmas: vec![0.0, 0.01, 0.05, 0.1, 0.5] };
    let rows = sweep(&cfg, &[EstimatorSpec::corrected_scd(Correction::Abs)], &src, &axis, 3, 1.0, &NoiseConfig::clean()).unwrap();
    assert_eq!(rows.len(), 25);
    let errors: Vec<&String> = rows.iter().filter_map(|r| r.error.as_ref()).collect();
    let clean = rows.iter().find(|r| r.cell.epsilon == Some(1.0) && r.cell.sigma == Some(0.0)).unwrap().mean.unwrap_or(f64::NAN);
    let worst = rows.iter().min_by(|a, b| a.mean.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.mean.unwrap_or(f64::NEG_INFINITY))).unwrap();
    let drop = clean - worst.mean.unwrap_or(f64::NEG_INFINITY);
    let detail = format!(
        "clean {clean:.4}, worst cell (eps={:?}, sigma={:?}) {:.4}, drop {drop:.4}; cell errors: {}",
        worst.cell.epsilon,
        worst.cell.sigma,
        worst.mean.unwrap_or(f64::NAN),
        errors.len()
    );
    report(8, errors.is_empty() && drop <= 0.05, start.elapsed(), Some(Duration::from_secs(900)), &detail);
}

#[test]
fn criterion_09_weak_label_statistics() {
    let start = Instant::now();
    let pi = 0.2;
    let data = TaskGenerator::new(TaskSpec::canonical(pi), 900).unwrap().annotate_pairs_exact(100_000).unwrap();
    let s: Vec<f64> = data.pairs().iter().map(|w| w.s).collect();
    let (mean, se) = mean_stderr(&s);
    let expected = pi * pi + (1.0 - pi) * (1.0 - pi);
    let z = (mean - expected) / se;
    let feasible = data.pairs().iter().filter(|w| feasible_region_check(w.s, w.c)).count();
    let detail = format!("mean s {mean:.5} vs {expected:.2} (z = {z:.2}), feasible {feasible}/{}", data.len());
    report(9, z.abs() <= 4.0 && feasible == data.len(), start.elapsed(), None, &detail);
}

fn outputs_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        if rel.ends_with(".csv") || rel.ends_with("verify_report.json") || rel.ends_with(".wpm") {
            files.push((rel, std::fs::read(&entry).unwrap()));
        }
    }
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn criterion_10_cli_determinism() {
    let start = Instant::now();
    let d = tempfile::tempdir().unwrap();
    let base = "n_seeds = 2\n[train]\nepochs = 3\ntail_epochs = 1\nhidden = [16, 16]\nbatch_pairs = 32\n[data]\nn_pairs = 150\nn_test = 200\n";
    let configs = [
        ("generate", "n_pairs = 500\nn_test = 200\nseed = 3\n[noise]\nepsilon = 1.1\nsigma_noise = 0.1\n".to_string()),
        ("train", format!("seed = 4\n{base}[estimators]\nnames = [\"scd\", \"scd-abs\", \"convex-relu\"]\n")),
        ("sweep", format!("seed = 5\n{base}[sweep]\naxis = \"noise\"\nepsilons = [0.9, 1.0]\nsigmas = [0.0, 0.1]\n")),
        ("verify", "seed = 6\nn_reps = 50\nn_pairs = 20\nbias_reps = 50\nbias_sizes = [10, 40]\nn_bootstrap = 20\nannotation_pairs = 1000\n".to_string()),
    ];
    let mut mismatches = Vec::new();
    let mut n_files = 0;
    for (cmd, text) in &configs {
        let cfg = d.path().join(format!("{cmd}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let mut runs = Vec::new();
        for (k, threads) in ["1", "2"].iter().enumerate() {
            let out = d.path().join(format!("{cmd}-{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_weakpairs"))
                .args([cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
                .output()
                .unwrap()
                .status;
            assert!(matches!(status.code(), Some(0) | Some(3)), "{cmd}: {status:?}");
            runs.push(outputs_of(&out));
        }
        assert!(!runs[0].is_empty(), "{cmd} wrote no outputs");
        n_files += runs[0].len();
        if runs[0] != runs[1] {
            mismatches.push(*cmd);
        }
    }
    let detail = format!("{n_files} output files across {} commands; differing: {mismatches:?}", configs.len());
    report(10, mismatches.is_empty(), start.elapsed(), None, &detail);
}
