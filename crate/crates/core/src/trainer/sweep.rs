use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_experiment, DataSource, TrainConfig};
use crate::data::NoiseConfig;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, EstimatorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "lowercase", deny_unknown_fields)]
pub enum SweepAxis {
    Fraction { values: Vec<f64> },
    /// Cells in epsilon-major order.
    Noise { epsilons: Vec<f64>, sigmas: Vec<f64> },
    Gamma { values: Vec<f64> },
    Lambda { values: Vec<f64> },
    Prior { values: Vec<f64> },
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub axis: &'static str,
    pub value: f64,
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub estimator: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub accuracies: Vec<f64>,
    pub error: Option<String>,
}

fn in_unit(name: &'static str, values: &[f64], open_low: bool, open_high: bool) -> Result<()> {
    for &v in values {
        let lo = if open_low { v > 0.0 } else { v >= 0.0 };
        let hi = if open_high { v < 1.0 } else { v <= 1.0 };
        if !(v.is_finite() && lo && hi) {
            return Err(Error::param(name, format!("value {v} is out of range")));
        }
    }
    Ok(())
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Fraction { .. } => "fraction",
            SweepAxis::Noise { .. } => "noise",
            SweepAxis::Gamma { .. } => "gamma",
            SweepAxis::Lambda { .. } => "lambda",
            SweepAxis::Prior { .. } => "prior",
        }
    }

    pub fn validate(&self, estimators: &[EstimatorSpec]) -> Result<()> {
        let empty = match self {
            SweepAxis::Noise { epsilons, sigmas } => epsilons.is_empty() || sigmas.is_empty(),
            SweepAxis::Fraction { values } | SweepAxis::Gamma { values } | SweepAxis::Lambda { values } | SweepAxis::Prior { values } => {
                values.is_empty()
            }
        };
        if empty {
            return Err(Error::param("axis", "sweep axis has no values"));
        }
        match self {
            SweepAxis::Fraction { values } => in_unit("fraction", values, true, false),
            SweepAxis::Gamma { values } => {
                in_unit("gamma", values, false, false)?;
                if let Some(e) = estimators.iter().find(|e| !matches!(e.kind, EstimatorKind::Convex | EstimatorKind::CorrectedConvex)) {
                    return Err(Error::param("estimators", format!("{} has no gamma to sweep", e.label())));
                }
                Ok(())
            }
            SweepAxis::Lambda { values } => {
                in_unit("lambda", values, false, false)?;
                if let Some(e) = estimators.iter().find(|e| e.kind != EstimatorKind::ScdLambda) {
                    return Err(Error::param("estimators", format!("{} has no lambda to sweep", e.label())));
                }
                Ok(())
            }
            SweepAxis::Prior { values } => in_unit("prior", values, true, true),
            SweepAxis::Noise { epsilons, sigmas } => {
                if epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                    return Err(Error::param("epsilons", "must be positive"));
                }
                if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(Error::param("sigmas", "must be nonnegative"));
                }
                Ok(())
            }
        }
    }

    pub fn cells(&self) -> Vec<SweepCell> {
        let simple = |values: &[f64]| {
            values.iter().map(|&value| SweepCell { axis: self.name(), value, epsilon: None, sigma: None }).collect::<Vec<_>>()
        };
        match self {
            SweepAxis::Fraction { values } | SweepAxis::Gamma { values } | SweepAxis::Lambda { values } | SweepAxis::Prior { values } => {
                simple(values)
            }
            SweepAxis::Noise { epsilons, sigmas } => epsilons
                .iter()
                .flat_map(|&e| sigmas.iter().map(move |&s| SweepCell { axis: "noise", value: e, epsilon: Some(e), sigma: Some(s) }))
                .collect(),
        }
    }
}

/// One [`run_experiment`] per `(cell, estimator)`, cells in axis order and
/// estimators in the given order within each cell. A failing cell is recorded
/// in its row and the sweep continues.
pub fn sweep(
    template: &TrainConfig,
    estimators: &[EstimatorSpec],
    source: &DataSource,
    axis: &SweepAxis,
    n_seeds: usize,
    fraction: f64,
    noise: &NoiseConfig,
) -> Result<Vec<SweepRow>> {
    if estimators.is_empty() {
        return Err(Error::param("estimators", "at least one estimator is required"));
    }
    axis.validate(estimators)?;
    template.validate()?;
    let jobs: Vec<(SweepCell, EstimatorSpec)> =
        axis.cells().into_iter().flat_map(|c| estimators.iter().map(move |e| (c, *e))).collect();

    let rows = jobs
        .into_par_iter()
        .map(|(cell, base)| {
            let mut spec = base;
            let mut frac = fraction;
            let mut nz = *noise;
            let mut src = None;
            match axis {
                SweepAxis::Fraction { .. } => frac = cell.value,
                SweepAxis::Gamma { .. } => spec.gamma = cell.value,
                SweepAxis::Lambda { .. } => spec.lambda = cell.value,
                SweepAxis::Noise { .. } => {
                    nz.epsilon = cell.value;
                    nz.sigma_noise = cell.sigma.expect("noise cells carry sigma");
                }
                SweepAxis::Prior { .. } => src = Some(source.with_prior(cell.value)),
            }
            let cfg = TrainConfig { estimator: spec, ..template.clone() };
            let outcome = match src {
                Some(Err(e)) => Err(e),
                Some(Ok(s)) => run_experiment(&cfg, &s, n_seeds, frac, &nz),
                None => run_experiment(&cfg, source, n_seeds, frac, &nz),
            };
            match outcome {
                Ok(r) => SweepRow {
                    cell,
                    estimator: spec.label(),
                    mean: Some(r.mean),
                    std: Some(r.std),
                    accuracies: r.accuracies(),
                    error: None,
                },
                Err(e) => SweepRow { cell, estimator: spec.label(), mean: None, std: None, accuracies: vec![], error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(rows)
}
