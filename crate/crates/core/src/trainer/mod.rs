//! Mini-batch training over pair datasets, multi-seed experiments and sweeps.

mod experiment;
mod sweep;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{evaluate_with_weights, Correction, EstimatorSpec, PairLosses, PairScores};
use crate::loss::{predict, LossKind, MarginLoss};
use crate::model::{AdamConfig, AdamState, Mlp};
use crate::pairs::{ClassPrior, LabeledDataset, PairDataset};
use crate::seeding::{self, stream};

pub use experiment::{population_std, run_experiment, Annotator, DataSource, ExperimentResult, GeneratorSource, PreparedData};
pub use sweep::{sweep, SweepAxis, SweepCell, SweepRow};

/// Rows scored per forward pass during evaluation.
const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub estimator: EstimatorSpec,
    pub epochs: usize,
    pub batch_pairs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Epochs between test evaluations; the last `tail_epochs` are always
    /// evaluated.
    pub eval_every: usize,
    pub tail_epochs: usize,
    pub hidden: Vec<usize>,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorSpec::corrected_scd(Correction::Abs),
            epochs: 200,
            batch_pairs: 256,
            lr: 1e-3,
            weight_decay: 1e-5,
            seed: 0,
            eval_every: 1,
            tail_epochs: 10,
            hidden: vec![300, 300, 300],
            loss: LossKind::Logistic,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        if self.tail_epochs < 1 {
            return Err(Error::param("tail_epochs", "must be at least 1"));
        }
        if self.epochs < self.tail_epochs {
            return Err(Error::param("epochs", format!("must be at least tail_epochs ({})", self.tail_epochs)));
        }
        if self.batch_pairs < 1 {
            return Err(Error::param("batch_pairs", "must be at least 1"));
        }
        if self.eval_every < 1 {
            return Err(Error::param("eval_every", "must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::param("lr", format!("must be finite and nonnegative, got {}", self.lr)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::param("weight_decay", format!("must be finite and nonnegative, got {}", self.weight_decay)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::param("hidden", "layer widths must be positive"));
        }
        if MarginLoss::<f64>::derivative(&self.loss, 0.0, crate::pairs::Label::Pos).is_none() {
            return Err(Error::param("loss", "training needs a differentiable loss"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, weight_decay: self.weight_decay, ..AdamConfig::default() }
    }
}

/// Training log of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Mean mini-batch risk per epoch.
    pub train_risk: Vec<f64>,
    /// Smallest mini-batch risk per epoch.
    pub min_batch_risk: Vec<f64>,
    /// Test accuracy per epoch; `None` where evaluation was skipped.
    pub test_accuracy: Vec<Option<f64>>,
    /// Mean test accuracy over the last `tail_epochs` epochs.
    pub final_accuracy: f64,
    /// First epoch (1-based) whose mean training risk was negative.
    pub first_negative_epoch: Option<usize>,
    pub model: Mlp<f64>,
}

/// Fraction of `test` with `predict(g(x)) == y`; ties predict +1.
pub fn evaluate_accuracy(model: &Mlp<f64>, test: &LabeledDataset<f64>) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    let x = test.features();
    let mut start = 0;
    while start < test.len() {
        let end = (start + EVAL_CHUNK).min(test.len());
        let scores = model.forward(x.slice(ndarray::s![start..end, ..]))?;
        hits += scores.iter().zip(&test.labels()[start..end]).filter(|(&z, &y)| predict(z) == y).count();
        start = end;
    }
    Ok(hits as f64 / test.len() as f64)
}

/// Risk and parameter gradient of `spec` on one batch.
pub fn batch_risk_and_gradient(
    model: &Mlp<f64>,
    spec: &EstimatorSpec,
    batch: &PairDataset<f64>,
    prior: &ClassPrior<f64>,
    loss: &LossKind,
) -> Result<(f64, crate::model::Gradients<f64>)> {
    let stacked = batch.stacked_features();
    let cache = model.forward_cached(stacked.view())?;
    let scores = PairScores::from_stacked(cache.scores.as_slice().expect("contiguous scores"));
    let losses = PairLosses::evaluate(loss, &scores);
    let (risk, weights) = evaluate_with_weights(spec, batch, prior, &losses)?;
    let g = weights.score_gradients(loss, &scores).ok_or_else(|| Error::param("loss", "training needs a differentiable loss"))?;
    let upstream: ndarray::Array1<f64> = g.x.into_iter().chain(g.x_prime).collect();
    Ok((risk, model.backward(&cache, upstream.view())?))
}

/// Trains a freshly initialized model.
///
/// Model initialization uses `derive_seed(config.seed, INIT, 0)` and batch
/// order `derive_seed(config.seed, SHUFFLE, 0)`; pairs are reshuffled every
/// epoch and the last batch may be short.
pub fn train(config: &TrainConfig, data: &PairDataset<f64>, prior: &ClassPrior<f64>, test: &LabeledDataset<f64>) -> Result<RunResult> {
    config.validate()?;
    config.estimator.validate_for(prior)?;
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if test.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), actual: test.dim() });
    }
    let mut model = Mlp::new(data.dim(), &config.hidden, seeding::derive_seed(config.seed, stream::INIT, 0))?;
    let mut adam = AdamState::new(&model, config.adam());
    let mut rng = seeding::rng_for(config.seed, stream::SHUFFLE, 0);
    let mut order: Vec<usize> = (0..data.len()).collect();

    let mut train_risk = Vec::with_capacity(config.epochs);
    let mut min_batch_risk = Vec::with_capacity(config.epochs);
    let mut test_accuracy = Vec::with_capacity(config.epochs);
    let mut first_negative_epoch = None;
    let tail_start = config.epochs - config.tail_epochs;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut risks = Vec::with_capacity(data.len().div_ceil(config.batch_pairs));
        for idx in order.chunks(config.batch_pairs) {
            let batch = data.subset(idx)?;
            let (risk, grads) = batch_risk_and_gradient(&model, &config.estimator, &batch, prior, &config.loss)?;
            if !risk.is_finite() {
                return Err(Error::NonFiniteRisk { epoch: epoch + 1 });
            }
            risks.push(risk);
            adam.step(&mut model, &grads);
        }
        let mean = risks.iter().sum::<f64>() / risks.len() as f64;
        train_risk.push(mean);
        min_batch_risk.push(risks.iter().copied().fold(f64::INFINITY, f64::min));
        if mean < 0.0 && first_negative_epoch.is_none() {
            first_negative_epoch = Some(epoch + 1);
        }
        let evaluate = (epoch + 1) % config.eval_every == 0 || epoch >= tail_start;
        test_accuracy.push(if evaluate { Some(evaluate_accuracy(&model, test)?) } else { None });
    }

    let tail: Vec<f64> = test_accuracy[tail_start..].iter().map(|a| a.expect("tail epochs are evaluated")).collect();
    let final_accuracy = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(RunResult { train_risk, min_batch_risk, test_accuracy, final_accuracy, first_negative_epoch, model })
}
