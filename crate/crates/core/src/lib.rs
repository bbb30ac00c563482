//! Binary classification from unlabeled pairs annotated with a similarity
//! confidence `s` and a confidence difference `c`.
//!
//! The numerical core (losses, estimators, models) is generic over the float
//! type; data generation, training and the drivers work in `f64`. The
//! aliases below name the common instantiations.

pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod loss;
pub mod model;
pub mod pairs;
pub mod scalar;
pub mod seeding;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use estimators::{Correction, EstimatorKind, EstimatorSpec};
pub use loss::LossKind;
pub use pairs::{ClassPrior, Label};
pub use scalar::Scalar;

pub type WeakPair64 = pairs::WeakPair<f64>;
pub type PairDataset64 = pairs::PairDataset<f64>;
pub type PairDataset32 = pairs::PairDataset<f32>;
pub type LabeledDataset64 = pairs::LabeledDataset<f64>;
pub type ClassPrior64 = pairs::ClassPrior<f64>;
pub type Mlp64 = model::Mlp<f64>;
pub type Mlp32 = model::Mlp<f32>;
