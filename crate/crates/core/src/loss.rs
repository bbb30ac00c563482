//! Binary margin losses `l(z, y)`.

use serde::{Deserialize, Serialize};

use crate::pairs::Label;
use crate::scalar::Scalar;

/// Softplus `ln(1 + e^t)` without overflow.
#[inline]
fn softplus<T: Scalar>(t: T) -> T {
    t.max(T::zero()) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + exp(-y z))`.
pub fn logistic_loss<T: Scalar>(z: T, y: Label) -> T {
    softplus(-y.sign::<T>() * z)
}

/// `d/dz ln(1 + exp(-y z)) = -y sigmoid(-y z)`.
pub fn logistic_loss_grad<T: Scalar>(z: T, y: Label) -> T {
    let ys = y.sign::<T>();
    -ys * sigmoid(-ys * z)
}

/// 0 when the prediction `sign(z)` matches `y`, else 1. `z = 0` predicts +1.
pub fn zero_one_loss<T: Scalar>(z: T, y: Label) -> T {
    if predict(z) == y {
        T::zero()
    } else {
        T::one()
    }
}

/// Predicted label of a score; ties go to the positive class.
#[inline]
pub fn predict<T: Scalar>(z: T) -> Label {
    if z >= T::zero() {
        Label::Pos
    } else {
        Label::Neg
    }
}

/// A nonnegative loss on a real-valued score.
pub trait MarginLoss<T: Scalar> {
    fn value(&self, z: T, y: Label) -> T;

    /// `d/dz value(z, y)`, or `None` for evaluation-only losses.
    fn derivative(&self, _z: T, _y: Label) -> Option<T> {
        None
    }
}

/// Loss selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    Logistic,
    ZeroOne,
}

impl<T: Scalar> MarginLoss<T> for LossKind {
    fn value(&self, z: T, y: Label) -> T {
        match self {
            LossKind::Logistic => logistic_loss(z, y),
            LossKind::ZeroOne => zero_one_loss(z, y),
        }
    }

    fn derivative(&self, z: T, y: Label) -> Option<T> {
        match self {
            LossKind::Logistic => Some(logistic_loss_grad(z, y)),
            LossKind::ZeroOne => None,
        }
    }
}

/// `l(z, y) = k` for every input; calibrates estimator coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantLoss<T>(pub T);

impl<T: Scalar> MarginLoss<T> for ConstantLoss<T> {
    fn value(&self, _z: T, _y: Label) -> T {
        self.0
    }

    fn derivative(&self, _z: T, _y: Label) -> Option<T> {
        Some(T::zero())
    }
}
