use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{bias_non_increasing, corrected_bias, grad_check, mc_unbiasedness_many, mean_stderr, variance_profile};
use crate::data::{TaskGenerator, TaskSpec};
use crate::error::{Error, Result};
use crate::estimators::{evaluate, Correction, EstimatorKind, EstimatorSpec, PairLosses};
use crate::loss::LossKind;
use crate::model::Mlp;
use crate::pairs::{feasible_region_check, ClassPrior, PairDataset};
use crate::seeding::{self, derive_seed, stream};

pub const CHECK_NAMES: [&str; 6] = ["calibration", "unbiasedness", "variance", "gradients", "corrected-bias", "annotation"];

/// Settings of every check; all checks run on the canonical 2-D task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    /// z threshold of the Monte-Carlo checks.
    pub threshold: f64,
    /// Hidden widths of the fixed random model (the zero model is always added).
    pub model_hidden: Vec<usize>,
    pub calibration_datasets: usize,
    pub calibration_constants: Vec<f64>,
    pub calibration_tolerance: f64,
    pub priors: Vec<f64>,
    pub n_pairs: usize,
    pub n_reps: usize,
    pub variance_prior: f64,
    pub lambdas: Vec<f64>,
    pub n_bootstrap: usize,
    /// Standard-error multiple of the variance comparisons.
    pub variance_k: f64,
    pub grad_hidden: Vec<usize>,
    pub grad_pairs: usize,
    pub grad_prior: f64,
    pub grad_step: f64,
    pub grad_tolerance: f64,
    pub bias_prior: f64,
    pub bias_sizes: Vec<usize>,
    pub bias_reps: usize,
    /// Standard-error multiple of the bias trend comparison.
    pub bias_trend_k: f64,
    pub annotation_prior: f64,
    pub annotation_pairs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threshold: 4.0,
            model_hidden: vec![16, 16],
            calibration_datasets: 100,
            calibration_constants: vec![1.0, 0.37, 5.0],
            calibration_tolerance: 1e-12,
            priors: vec![0.2, 0.5, 0.8],
            n_pairs: 200,
            n_reps: 2000,
            variance_prior: 0.2,
            lambdas: vec![0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0],
            n_bootstrap: 1000,
            variance_k: 3.0,
            grad_hidden: vec![8, 8, 8],
            grad_pairs: 32,
            grad_prior: 0.3,
            grad_step: 1e-5,
            grad_tolerance: 1e-4,
            bias_prior: 0.2,
            bias_sizes: vec![50, 200, 800],
            bias_reps: 1000,
            bias_trend_k: 3.0,
            annotation_prior: 0.2,
            annotation_pairs: 100_000,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} is not in (0, 1)")))
            }
        };
        for &p in &self.priors {
            unit("priors", p)?;
        }
        unit("variance_prior", self.variance_prior)?;
        unit("grad_prior", self.grad_prior)?;
        unit("bias_prior", self.bias_prior)?;
        unit("annotation_prior", self.annotation_prior)?;
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::param("threshold", "must be positive"));
        }
        if self.n_reps < 2 || self.bias_reps < 2 || self.n_bootstrap < 2 {
            return Err(Error::param("n_reps", "replicate counts must be at least 2"));
        }
        if self.n_pairs == 0 || self.grad_pairs == 0 || self.annotation_pairs < 2 || self.bias_sizes.contains(&0) {
            return Err(Error::param("n_pairs", "sample sizes must be positive"));
        }
        if self.calibration_datasets == 0 || self.calibration_constants.is_empty() {
            return Err(Error::param("calibration_datasets", "need at least one dataset and one constant"));
        }
        Ok(())
    }
}

/// One entry of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub inputs: Value,
    pub statistics: Value,
    pub pass: bool,
}

/// Every uncorrected estimator, one representative per kind and mixing weight.
pub fn uncorrected_specs() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::sconf(),
        EstimatorSpec::confdiff(),
        EstimatorSpec::convex(0.5),
        EstimatorSpec::scd(),
        EstimatorSpec::scd_lambda(0.25),
        EstimatorSpec::scd_lambda(0.9),
    ]
}

/// Value of `spec` under the loss `l = k` predicted from the coefficients
/// alone. The single-confidence estimators telescope to `k`; the joint family
/// keeps the per-pair factor `2(pi+^2 + pi-^2) + 1 - 2s + 2c(1 - 2 lambda)`,
/// whose expectation is 1.
pub fn constant_loss_reference(spec: &EstimatorSpec, data: &PairDataset<f64>, prior: &ClassPrior<f64>, k: f64) -> f64 {
    let (pp, pm) = (prior.pi_plus(), prior.pi_minus());
    let lambda = match spec.kind {
        EstimatorKind::Scd | EstimatorKind::CorrectedScd => 0.5,
        EstimatorKind::ScdLambda => spec.lambda,
        _ => return k,
    };
    let q = 2.0 * (pp * pp + pm * pm) + 1.0;
    let terms: Vec<f64> = data.pairs().iter().map(|w| q - 2.0 * w.s + 2.0 * w.c * (1.0 - 2.0 * lambda)).collect();
    k * crate::scalar::pairwise_sum(&terms) / data.len() as f64
}

/// Expands `"all"` and rejects unknown names.
pub fn resolve_checks(names: &[String]) -> Result<Vec<&'static str>> {
    if names.is_empty() || names.iter().any(|n| n == "all") {
        return Ok(CHECK_NAMES.to_vec());
    }
    names
        .iter()
        .map(|n| {
            CHECK_NAMES
                .iter()
                .copied()
                .find(|c| c == n)
                .ok_or_else(|| Error::param("checks", format!("unknown check `{n}`; valid names: all, {}", CHECK_NAMES.join(", "))))
        })
        .collect()
}

/// Runs the named checks (`"all"` for every one) in [`CHECK_NAMES`] order.
/// A statistical failure is a record with `pass = false`, not an error.
pub fn run_checks(config: &VerifyConfig, names: &[String]) -> Result<Vec<CheckRecord>> {
    config.validate()?;
    let selected = resolve_checks(names)?;
    CHECK_NAMES
        .iter()
        .filter(|c| selected.contains(c))
        .map(|&c| match c {
            "calibration" => calibration(config),
            "unbiasedness" => unbiasedness(config),
            "variance" => variance(config),
            "gradients" => gradients(config),
            "corrected-bias" => bias(config),
            "annotation" => annotation(config),
            _ => unreachable!("check names are resolved above"),
        })
        .collect()
}

fn fixed_models(config: &VerifyConfig) -> Result<Vec<(&'static str, Mlp<f64>)>> {
    Ok(vec![
        ("random", Mlp::new(2, &config.model_hidden, derive_seed(config.seed, stream::INIT, 0))?),
        ("zero", Mlp::zeros(2, &config.model_hidden)?),
    ])
}

fn generator(config: &VerifyConfig, pi: f64, index: u64) -> Result<TaskGenerator> {
    TaskGenerator::new(TaskSpec::canonical(pi), derive_seed(config.seed, stream::MONTE_CARLO, index))
}

fn calibration(config: &VerifyConfig) -> Result<CheckRecord> {
    let mut rng = seeding::rng_for(config.seed, stream::MONTE_CARLO, 0);
    let mut worst_residual: f64 = 0.0;
    let mut worst_literal: Vec<(String, f64)> = uncorrected_specs().iter().map(|s| (s.label(), 0.0)).collect();
    for i in 0..config.calibration_datasets {
        let pi = rng.random_range(0.05..0.95);
        let n = rng.random_range(1..=200);
        let data = TaskGenerator::new(TaskSpec::canonical(pi), rng.random())?.annotate_pairs_exact(n)?;
        let prior = ClassPrior::new(pi)?;
        let k = config.calibration_constants[i % config.calibration_constants.len()];
        let losses = PairLosses::constant(n, k);
        for (j, spec) in uncorrected_specs().iter().enumerate() {
            if spec.validate_for(&prior).is_err() {
                continue;
            }
            let value = evaluate(spec, &data, &prior, &losses)?;
            let reference = constant_loss_reference(spec, &data, &prior, k);
            worst_residual = worst_residual.max((value - reference).abs());
            worst_literal[j].1 = worst_literal[j].1.max((value - k).abs() / k);
        }
    }
    Ok(CheckRecord {
        name: "calibration".into(),
        inputs: json!({ "datasets": config.calibration_datasets, "constants": config.calibration_constants, "tolerance": config.calibration_tolerance }),
        statistics: json!({
            "max_residual": worst_residual,
            "max_relative_deviation_from_k": worst_literal.iter().map(|(l, v)| json!({ "estimator": l, "value": v })).collect::<Vec<_>>(),
        }),
        pass: worst_residual <= config.calibration_tolerance,
    })
}

fn unbiasedness(config: &VerifyConfig) -> Result<CheckRecord> {
    let loss = LossKind::Logistic;
    let mut reports = Vec::new();
    for (pi_index, &pi) in config.priors.iter().enumerate() {
        let gen = generator(config, pi, pi_index as u64)?;
        let prior = gen.prior();
        let specs: Vec<EstimatorSpec> = uncorrected_specs().into_iter().filter(|s| s.validate_for(&prior).is_ok()).collect();
        for (name, model) in fixed_models(config)? {
            for r in mc_unbiasedness_many(&gen, &model, &loss, &specs, config.n_pairs, config.n_reps, config.threshold)? {
                reports.push(json!({ "pi_plus": pi, "model": name, "report": r }));
            }
        }
    }
    let pass = reports.iter().all(|r| r["report"]["pass"] == json!(true));
    Ok(CheckRecord {
        name: "unbiasedness".into(),
        inputs: json!({ "priors": config.priors, "n_pairs": config.n_pairs, "n_reps": config.n_reps, "threshold": config.threshold, "loss": loss }),
        statistics: json!({ "reports": reports }),
        pass,
    })
}

fn variance(config: &VerifyConfig) -> Result<CheckRecord> {
    let gen = generator(config, config.variance_prior, 100)?;
    let model = fixed_models(config)?.remove(0).1;
    let profile = variance_profile(&gen, &model, &LossKind::Logistic, &config.lambdas, config.n_pairs, config.n_reps, config.n_bootstrap)?;
    let minimum = profile.minimum_at_half(config.variance_k);
    let symmetric = profile.symmetric(config.variance_k);
    Ok(CheckRecord {
        name: "variance".into(),
        inputs: json!({ "pi_plus": config.variance_prior, "lambdas": config.lambdas, "n_pairs": config.n_pairs, "n_reps": config.n_reps, "n_bootstrap": config.n_bootstrap, "k": config.variance_k }),
        statistics: json!({ "profile": profile, "minimum_at_half": minimum, "symmetric": symmetric }),
        pass: minimum && symmetric,
    })
}

/// Every estimator kind, including the corrected ones and the supervised
/// reference.
pub fn all_kinds() -> Vec<EstimatorSpec> {
    let mut v = uncorrected_specs();
    for f in [Correction::None, Correction::Relu, Correction::Abs] {
        v.push(EstimatorSpec::corrected_scd(f));
        v.push(EstimatorSpec::corrected_convex(0.5, f));
    }
    v.push(EstimatorSpec::supervised());
    v
}

fn gradients(config: &VerifyConfig) -> Result<CheckRecord> {
    let mut gen = generator(config, config.grad_prior, 200)?;
    let data = gen.annotate_pairs_exact(config.grad_pairs)?;
    let prior = gen.prior();
    let model = Mlp::new(2, &config.grad_hidden, derive_seed(config.seed, stream::INIT, 1))?;
    let mut reports = Vec::new();
    for spec in all_kinds() {
        reports.push(grad_check(&model, &data, &prior, &spec, &LossKind::Logistic, config.grad_step, config.seed)?);
    }
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let pass = worst <= config.grad_tolerance && reports.iter().all(|r| r.n_checked > 0);
    Ok(CheckRecord {
        name: "gradients".into(),
        inputs: json!({ "hidden": config.grad_hidden, "n_params": model.num_params(), "n_pairs": config.grad_pairs, "pi_plus": config.grad_prior, "step": config.grad_step, "tolerance": config.grad_tolerance }),
        statistics: json!({ "max_rel_error": worst, "reports": reports }),
        pass,
    })
}

fn bias(config: &VerifyConfig) -> Result<CheckRecord> {
    let gen = generator(config, config.bias_prior, 300)?;
    let model = fixed_models(config)?.remove(0).1;
    let reports = config
        .bias_sizes
        .iter()
        .map(|&n| corrected_bias(&gen, &model, &LossKind::Logistic, Correction::Abs, n, config.bias_reps, config.threshold))
        .collect::<Result<Vec<_>>>()?;
    let nonnegative = reports.iter().all(|r| r.nonnegative);
    let trend = bias_non_increasing(&reports, config.bias_trend_k);
    Ok(CheckRecord {
        name: "corrected-bias".into(),
        inputs: json!({ "pi_plus": config.bias_prior, "sizes": config.bias_sizes, "n_reps": config.bias_reps, "threshold": config.threshold, "trend_k": config.bias_trend_k }),
        statistics: json!({ "reports": reports, "nonnegative": nonnegative, "non_increasing": trend }),
        pass: nonnegative && trend,
    })
}

fn annotation(config: &VerifyConfig) -> Result<CheckRecord> {
    let mut gen = generator(config, config.annotation_prior, 400)?;
    let data = gen.annotate_pairs_exact(config.annotation_pairs)?;
    let (pp, pm) = (config.annotation_prior, 1.0 - config.annotation_prior);
    let expected_s = pp * pp + pm * pm;
    let s: Vec<f64> = data.pairs().iter().map(|w| w.s).collect();
    let c: Vec<f64> = data.pairs().iter().map(|w| w.c).collect();
    let (mean_s, se_s) = mean_stderr(&s);
    let (mean_c, se_c) = mean_stderr(&c);
    let feasible = data.pairs().iter().filter(|w| feasible_region_check(w.s, w.c)).count();
    let z_s = (mean_s - expected_s) / se_s;
    let z_c = mean_c / se_c;
    let pass = z_s.abs() <= config.threshold && z_c.abs() <= config.threshold && feasible == data.len();
    Ok(CheckRecord {
        name: "annotation".into(),
        inputs: json!({ "pi_plus": config.annotation_prior, "n_pairs": config.annotation_pairs, "threshold": config.threshold }),
        statistics: json!({
            "mean_s": mean_s, "stderr_s": se_s, "expected_s": expected_s, "z_s": z_s,
            "mean_c": mean_c, "stderr_c": se_c, "z_c": z_c,
            "feasible_fraction": feasible as f64 / data.len() as f64,
        }),
        pass,
    })
}
