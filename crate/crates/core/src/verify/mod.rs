//! Statistical checks of the estimators against ground truth.

mod gradcheck;
mod suite;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::TaskGenerator;
use crate::error::{Error, Result};
use crate::estimators::{corrected_scd_risk, evaluate, scd_risk_lambda, Correction, EstimatorSpec, PairLosses, PairScores};
use crate::loss::MarginLoss;
use crate::model::Mlp;
use crate::pairs::{ClassPrior, PairDataset};
use crate::scalar::pairwise_sum;
use crate::seeding::{self, stream};

pub use gradcheck::{grad_check, rel_error, GradCheckReport, GRAD_FLOOR};
pub use suite::{all_kinds, constant_loss_reference, resolve_checks, run_checks, uncorrected_specs, CheckRecord, VerifyConfig, CHECK_NAMES};

/// Replicate mean compared against a reference value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub label: String,
    pub mean: f64,
    /// Standard error of the replicate mean.
    pub stderr: f64,
    pub n_reps: usize,
    pub reference: f64,
    pub reference_stderr: f64,
    /// `(mean - reference) / sqrt(stderr^2 + reference_stderr^2)`.
    pub z: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl McReport {
    /// A zero combined standard error gives `z = 0` when the two values agree
    /// to 1e-12 and an infinite `z` otherwise.
    pub fn new(label: String, samples: &[f64], reference: f64, reference_stderr: f64, threshold: f64) -> Self {
        let (mean, stderr) = mean_stderr(samples);
        let combined = (stderr * stderr + reference_stderr * reference_stderr).sqrt();
        let diff = mean - reference;
        let z = if combined > 0.0 {
            diff / combined
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        Self { label, mean, stderr, n_reps: samples.len(), reference, reference_stderr, z, threshold, pass: z.abs() <= threshold }
    }
}

/// Sample mean and standard error (sample variance over `n - 1`).
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(v) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1) as f64 / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    let sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    pairwise_sum(&sq) / (n - 1.0)
}

fn pair_losses<L: MarginLoss<f64> + ?Sized>(model: &Mlp<f64>, data: &PairDataset<f64>, loss: &L) -> Result<PairLosses<f64>> {
    let scores = model.forward(data.stacked_features().view())?;
    Ok(PairLosses::evaluate(loss, &PairScores::from_stacked(scores.as_slice().expect("contiguous"))))
}

/// Monte-Carlo estimate of `R(g) = E[l(g(x), y)]` from `n_mc` labeled draws.
pub fn supervised_risk_oracle<L: MarginLoss<f64> + ?Sized>(gen: &mut TaskGenerator, model: &Mlp<f64>, loss: &L, n_mc: usize) -> Result<(f64, f64)> {
    if n_mc < 1000 {
        return Err(Error::param("n_mc", format!("must be at least 1000, got {n_mc}")));
    }
    let d = gen.sample_labeled(n_mc)?;
    let scores = model.forward(d.features().view())?;
    let terms: Vec<f64> = scores.iter().zip(d.labels()).map(|(&z, &y)| loss.value(z, y)).collect();
    Ok(mean_stderr(&terms))
}

/// Replicate datasets: replicate `r` is drawn from `gen.fork(MONTE_CARLO, r)`.
fn replicate(gen: &TaskGenerator, r: usize, n_pairs: usize) -> Result<PairDataset<f64>> {
    gen.fork(stream::MONTE_CARLO, r as u64).annotate_pairs_exact(n_pairs)
}

/// Oracle stream, disjoint from every replicate index.
fn oracle_generator(gen: &TaskGenerator) -> TaskGenerator {
    gen.fork(stream::MONTE_CARLO, u64::MAX)
}

/// Oracle sample size used by the unbiasedness and bias checks.
pub fn default_oracle_size(n_pairs: usize, n_reps: usize) -> usize {
    (4 * n_pairs * n_reps).clamp(100_000, 2_000_000)
}

/// Replicate-mean test of several unbiased estimators on shared replicate
/// datasets (paired design) against one supervised oracle.
pub fn mc_unbiasedness_many<L: MarginLoss<f64> + Sync + ?Sized>(
    gen: &TaskGenerator,
    model: &Mlp<f64>,
    loss: &L,
    specs: &[EstimatorSpec],
    n_pairs: usize,
    n_reps: usize,
    threshold: f64,
) -> Result<Vec<McReport>> {
    let prior = gen.prior();
    for s in specs {
        if s.effective_correction() != Correction::None {
            return Err(Error::param("spec", format!("{} is a corrected (biased) estimator", s.label())));
        }
        s.validate_for(&prior)?;
    }
    if n_reps < 2 || n_pairs < 1 {
        return Err(Error::param("n_reps", "need at least 2 replicates of at least 1 pair"));
    }
    let per_rep: Vec<Vec<f64>> = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let data = replicate(gen, r, n_pairs)?;
            let losses = pair_losses(model, &data, loss)?;
            specs.iter().map(|s| evaluate(s, &data, &prior, &losses)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let (reference, reference_se) = supervised_risk_oracle(&mut oracle_generator(gen), model, loss, default_oracle_size(n_pairs, n_reps))?;
    Ok(specs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let samples: Vec<f64> = per_rep.iter().map(|v| v[k]).collect();
            McReport::new(s.label(), &samples, reference, reference_se, threshold)
        })
        .collect())
}

pub fn mc_unbiasedness<L: MarginLoss<f64> + Sync + ?Sized>(
    gen: &TaskGenerator,
    model: &Mlp<f64>,
    loss: &L,
    spec: &EstimatorSpec,
    n_pairs: usize,
    n_reps: usize,
    threshold: f64,
) -> Result<McReport> {
    Ok(mc_unbiasedness_many(gen, model, loss, std::slice::from_ref(spec), n_pairs, n_reps, threshold)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub lambda: f64,
    pub variance: f64,
    /// Standard deviation of the variance over bootstrap resamples.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceProfile {
    pub rows: Vec<VarianceRow>,
    pub n_reps: usize,
    pub n_bootstrap: usize,
}

impl VarianceProfile {
    fn row(&self, lambda: f64) -> Option<&VarianceRow> {
        self.rows.iter().find(|r| (r.lambda - lambda).abs() < 1e-12)
    }

    /// `Var(0.5) <= Var(lambda) + k * stderr(lambda)` for every row.
    pub fn minimum_at_half(&self, k: f64) -> bool {
        let Some(half) = self.row(0.5) else { return false };
        self.rows.iter().all(|r| half.variance <= r.variance + k * r.stderr)
    }

    /// `|Var(lambda) - Var(1 - lambda)| <= k * sqrt(se^2 + se'^2)` wherever
    /// both are present.
    pub fn symmetric(&self, k: f64) -> bool {
        self.rows.iter().all(|r| match self.row(1.0 - r.lambda) {
            Some(m) => (r.variance - m.variance).abs() <= k * (r.stderr.powi(2) + m.stderr.powi(2)).sqrt(),
            None => true,
        })
    }
}

/// Variance of the joint lambda-family across replicates, with bootstrap
/// standard errors. `make(r)` supplies replicate `r`; the same replicates
/// and the same bootstrap resamples serve every lambda.
pub fn variance_profile_with<L, F>(
    make: F,
    prior: &ClassPrior<f64>,
    model: &Mlp<f64>,
    loss: &L,
    lambdas: &[f64],
    n_reps: usize,
    n_bootstrap: usize,
    seed: u64,
) -> Result<VarianceProfile>
where
    L: MarginLoss<f64> + Sync + ?Sized,
    F: Fn(usize) -> Result<PairDataset<f64>> + Sync,
{
    if lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::param("lambdas", "values must lie in [0, 1]"));
    }
    if !lambdas.contains(&0.5) {
        return Err(Error::param("lambdas", "0.5 must be included"));
    }
    if n_reps < 2 || n_bootstrap < 2 {
        return Err(Error::param("n_reps", "need at least 2 replicates and 2 bootstrap resamples"));
    }
    let values: Vec<Vec<f64>> = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let data = make(r)?;
            let losses = pair_losses(model, &data, loss)?;
            lambdas.iter().map(|&l| scd_risk_lambda(&data, prior, &losses, l)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut rng = seeding::rng_for(seed, stream::BOOTSTRAP, 0);
    let resamples: Vec<Vec<usize>> = (0..n_bootstrap).map(|_| (0..n_reps).map(|_| rng.random_range(0..n_reps)).collect()).collect();
    let rows = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let col: Vec<f64> = values.iter().map(|v| v[k]).collect();
            let boot: Vec<f64> = resamples.iter().map(|idx| sample_variance(&idx.iter().map(|&i| col[i]).collect::<Vec<_>>())).collect();
            VarianceRow { lambda, variance: sample_variance(&col), stderr: sample_variance(&boot).sqrt() }
        })
        .collect();
    Ok(VarianceProfile { rows, n_reps, n_bootstrap })
}

/// [`variance_profile_with`] on exact-annotated replicates from `gen`.
pub fn variance_profile<L: MarginLoss<f64> + Sync + ?Sized>(
    gen: &TaskGenerator,
    model: &Mlp<f64>,
    loss: &L,
    lambdas: &[f64],
    n_pairs: usize,
    n_reps: usize,
    n_bootstrap: usize,
) -> Result<VarianceProfile> {
    variance_profile_with(|r| replicate(gen, r, n_pairs), &gen.prior(), model, loss, lambdas, n_reps, n_bootstrap, gen.seed())
}

/// Bias of the corrected joint estimator at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub n_pairs: usize,
    pub correction: Correction,
    /// Replicate mean minus the supervised oracle, with combined stderr.
    pub vs_oracle: McReport,
    /// Paired estimate of the same bias: corrected minus uncorrected risk on
    /// each replicate (the uncorrected estimator is unbiased).
    pub paired_bias: f64,
    pub paired_stderr: f64,
    /// `vs_oracle` difference is at least `-threshold * stderr`.
    pub nonnegative: bool,
}

pub fn corrected_bias<L: MarginLoss<f64> + Sync + ?Sized>(
    gen: &TaskGenerator,
    model: &Mlp<f64>,
    loss: &L,
    correction: Correction,
    n_pairs: usize,
    n_reps: usize,
    threshold: f64,
) -> Result<BiasReport> {
    let prior = gen.prior();
    let pairs: Vec<(f64, f64)> = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let data = replicate(gen, r, n_pairs)?;
            let losses = pair_losses(model, &data, loss)?;
            let (corrected, terms) = corrected_scd_risk(&data, &prior, &losses, correction)?;
            Ok((corrected, corrected - terms.sum()))
        })
        .collect::<Result<_>>()?;
    let corrected: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let gaps: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (reference, reference_se) = supervised_risk_oracle(&mut oracle_generator(gen), model, loss, default_oracle_size(n_pairs, n_reps))?;
    let label = EstimatorSpec::corrected_scd(correction).label();
    let vs_oracle = McReport::new(label, &corrected, reference, reference_se, threshold);
    let (paired_bias, paired_stderr) = mean_stderr(&gaps);
    let nonnegative = vs_oracle.z >= -threshold;
    Ok(BiasReport { n_pairs, correction, vs_oracle, paired_bias, paired_stderr, nonnegative })
}

/// Absolute bias does not increase from one size to the next beyond `k`
/// combined standard errors of the paired estimates.
pub fn bias_non_increasing(reports: &[BiasReport], k: f64) -> bool {
    reports.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        b.paired_bias.abs() <= a.paired_bias.abs() + k * (a.paired_stderr.powi(2) + b.paired_stderr.powi(2)).sqrt()
    })
}

#[cfg(test)]
mod tests;
