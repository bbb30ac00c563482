//! Scalar abstraction shared by the numeric modules.
//!
//! Estimators, losses and the MLP are written once over [`Scalar`] and
//! instantiated for `f32` and `f64`. Data generation and the experiment
//! drivers work in `f64` only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable by every generic module in this crate.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (tree) summation.
///
/// The split points depend only on the slice length, so the result is
/// reproducible for a given input order regardless of threading.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = T::zero();
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of a mapped sequence.
pub fn pairwise_sum_by<T: Scalar, I, F>(items: I, f: F) -> T
where
    I: IntoIterator,
    F: FnMut(I::Item) -> T,
{
    let buf: Vec<T> = items.into_iter().map(f).collect();
    pairwise_sum(&buf)
}
