use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{evaluate, partial_sums, Correction, EstimatorSpec, PairLosses, PairScores};
use crate::loss::{LossKind, MarginLoss};
use crate::model::Mlp;
use crate::pairs::{ClassPrior, Label, PairDataset};
use crate::seeding::{self, stream};
use crate::trainer::batch_risk_and_gradient;

/// Denominator floor of the relative error `|a - b| / max(|a|, |b|, floor)`.
pub const GRAD_FLOOR: f64 = 1e-6;
/// Partial sums closer than this to 0 move the check point.
const KINK_MARGIN: f64 = 1e-6;
const MAX_PARAMS: usize = 200;
const MAX_PERTURBATIONS: usize = 50;
const MAX_STEP_HALVINGS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub label: String,
    pub max_rel_error: f64,
    pub n_checked: usize,
    /// Parameters whose every step crossed a ReLU or correction kink.
    pub n_skipped: usize,
    /// Times the check point was moved away from a correction kink.
    pub perturbations: usize,
    pub step: f64,
}

pub fn rel_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        return 0.0;
    }
    d / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

struct Probe {
    risk: f64,
    pattern: Vec<bool>,
    signs: Vec<bool>,
}

fn probe(model: &Mlp<f64>, spec: &EstimatorSpec, data: &PairDataset<f64>, prior: &ClassPrior<f64>, loss: &LossKind, x: &ndarray::Array2<f64>) -> Result<Probe> {
    let cache = model.forward_cached(x.view())?;
    let scores = PairScores::from_stacked(cache.scores.as_slice().expect("contiguous"));
    let losses = PairLosses::evaluate(loss, &scores);
    let risk = evaluate(spec, data, prior, &losses)?;
    let signs = if spec.effective_correction() == Correction::None {
        vec![]
    } else {
        partial_sums(spec, data, prior, &losses)?.iter().map(|&s| s > 0.0).collect()
    };
    Ok(Probe { risk, pattern: cache.activation_pattern(), signs })
}

/// Backpropagated gradient of the risk of `spec` against centered finite
/// differences, over every parameter or a seeded subset of 200.
///
/// For corrected kinds the check point is first moved (small seeded
/// parameter noise) until every partial sum is at least 1e-6 from 0. A
/// parameter whose `+-step` probe changes any ReLU activation or partial-sum
/// sign is retried with step/10, up to four times, then skipped.
pub fn grad_check(
    model: &Mlp<f64>,
    data: &PairDataset<f64>,
    prior: &ClassPrior<f64>,
    spec: &EstimatorSpec,
    loss: &LossKind,
    step: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if MarginLoss::<f64>::derivative(loss, 0.0, Label::Pos).is_none() {
        return Err(Error::param("loss", "gradient check needs a differentiable loss"));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::param("step", "must be positive"));
    }
    spec.validate_for(prior)?;
    let x = data.stacked_features();
    let mut rng = seeding::rng_for(seed, stream::MONTE_CARLO, 0);
    let mut m = model.clone();
    let mut perturbations = 0;
    if spec.effective_correction() != Correction::None {
        loop {
            let scores = m.forward(x.view())?;
            let losses = PairLosses::evaluate(loss, &PairScores::from_stacked(scores.as_slice().expect("contiguous")));
            let sums = partial_sums(spec, data, prior, &losses)?;
            if sums.iter().all(|s| s.abs() >= KINK_MARGIN) {
                break;
            }
            if perturbations == MAX_PERTURBATIONS {
                return Err(Error::param("model", "could not move the check point away from a correction kink"));
            }
            let p: Vec<f64> = m.params().iter().map(|&v| v + 1e-3 * (rng.random::<f64>() - 0.5)).collect();
            m.set_params(&p);
            perturbations += 1;
        }
    }

    let (_, grads) = batch_risk_and_gradient(&m, spec, data, prior, loss)?;
    let analytic = grads.flat();
    let n = m.num_params();
    let indices: Vec<usize> = if n <= MAX_PARAMS { (0..n).collect() } else { sample(&mut rng, n, MAX_PARAMS).into_vec() };
    let base = probe(&m, spec, data, prior, loss, &x)?;

    let mut max_rel_error: f64 = 0.0;
    let mut n_skipped = 0;
    for &i in &indices {
        let orig = m.param(i);
        let mut h = step;
        let mut fd = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            m.set_param(i, orig + h);
            let plus = probe(&m, spec, data, prior, loss, &x)?;
            m.set_param(i, orig - h);
            let minus = probe(&m, spec, data, prior, loss, &x)?;
            m.set_param(i, orig);
            let smooth = [&plus, &minus].iter().all(|p| p.pattern == base.pattern && p.signs == base.signs);
            if smooth {
                fd = Some((plus.risk - minus.risk) / (2.0 * h));
                break;
            }
            h /= 10.0;
        }
        match fd {
            Some(fd) => max_rel_error = max_rel_error.max(rel_error(fd, analytic[i])),
            None => n_skipped += 1,
        }
    }
    Ok(GradCheckReport {
        label: spec.label(),
        max_rel_error,
        n_checked: indices.len() - n_skipped,
        n_skipped,
        perturbations,
        step,
    })
}
