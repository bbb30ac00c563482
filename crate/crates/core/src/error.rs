use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("class prior {0} is outside the open interval (0, 1)")]
    PriorOutOfRange(f64),

    #[error("class prior {0} is too close to 0.5 for an estimator that divides by pi_plus - pi_minus")]
    PriorDegenerate(f64),

    #[error("invalid posterior {0}: must lie in [0, 1]")]
    InvalidPosterior(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("estimator {0} needs ground-truth labels, which this dataset does not carry")]
    MissingLabels(String),

    #[error("probe set contains a single class; cannot fit the annotator")]
    DegenerateProbe,

    #[error("non-finite training risk at epoch {epoch}")]
    NonFiniteRisk { epoch: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("label {value:?} at row {row} is neither in {{-1, +1}} nor in {{0, 1}}")]
    LabelDomain { row: usize, value: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("run for seed index {seed_index} failed: {source}")]
    Seed {
        seed_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
