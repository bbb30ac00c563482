//! Domain types for pairwise weak supervision and the algebra linking
//! positive-class posteriors to similarity-confidence and
//! confidence-difference labels.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance used by [`feasible_region_check`].
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Label::Pos => T::one(),
            Label::Neg => -T::one(),
        }
    }

    pub fn from_sign(v: i8) -> Option<Label> {
        match v {
            1 => Some(Label::Pos),
            -1 => Some(Label::Neg),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

/// Positive-class prior `pi_plus`; the negative prior is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPrior<T> {
    pi_plus: T,
}

impl<T: Scalar> ClassPrior<T> {
    pub fn new(pi_plus: T) -> Result<Self> {
        if !(pi_plus > T::zero() && pi_plus < T::one()) {
            return Err(Error::PriorOutOfRange(pi_plus.as_f64()));
        }
        Ok(Self { pi_plus })
    }

    #[inline]
    pub fn pi_plus(&self) -> T {
        self.pi_plus
    }

    #[inline]
    pub fn pi_minus(&self) -> T {
        T::one() - self.pi_plus
    }

    /// True when `pi_plus - pi_minus` is too small to divide by.
    pub fn is_balanced(&self) -> bool {
        (self.pi_plus.as_f64() - 0.5).abs() < 1e-12
    }

    pub fn cast<U: Scalar>(&self) -> ClassPrior<U> {
        ClassPrior { pi_plus: U::of(self.pi_plus.as_f64()) }
    }
}

/// Posteriors `p(y=+1|x)` and `p(y'=+1|x')` of the two points of a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPair<T> {
    pub p: T,
    pub p_prime: T,
}

impl<T: Scalar> PosteriorPair<T> {
    pub fn new(p: T, p_prime: T) -> Result<Self> {
        for v in [p, p_prime] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::InvalidPosterior(v.as_f64()));
            }
        }
        Ok(Self { p, p_prime })
    }
}

/// Similarity-confidence `s = p p' + (1-p)(1-p')` and confidence-difference
/// `c = p' - p` of a pair with the given posteriors.
pub fn weak_labels_from_posteriors<T: Scalar>(pp: PosteriorPair<T>) -> Result<(T, T)> {
    let PosteriorPair { p, p_prime } = PosteriorPair::new(pp.p, pp.p_prime)?;
    let s = p * p_prime + (T::one() - p) * (T::one() - p_prime);
    let c = p_prime - p;
    Ok((s, c))
}

/// Whether `(s, c)` is produced by some posterior pair in `[0, 1]^2`.
///
/// Substituting `p' = p + c` turns `s` into a convex quadratic in `p` whose
/// vertex `(1 - c) / 2` always lies inside the admissible interval, so the
/// attainable `s` for a given `|c| <= 1` is exactly
/// `[(1 - c^2) / 2, 1 - |c|]`.
pub fn feasible_region_check(s: f64, c: f64) -> bool {
    if !(s.is_finite() && c.is_finite()) {
        return false;
    }
    if c.abs() > 1.0 + FEASIBILITY_TOL {
        return false;
    }
    let c = c.clamp(-1.0, 1.0);
    let lo = 0.5 * (1.0 - c * c);
    let hi = 1.0 - c.abs();
    s >= lo - FEASIBILITY_TOL && s <= hi + FEASIBILITY_TOL
}

/// One unlabeled pair with its weak labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakPair<T> {
    pub x: Vec<T>,
    pub x_prime: Vec<T>,
    pub s: T,
    pub c: T,
}

impl<T: Scalar> WeakPair<T> {
    pub fn new(x: Vec<T>, x_prime: Vec<T>, s: T, c: T) -> Result<Self> {
        if x.len() != x_prime.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), actual: x_prime.len() });
        }
        Ok(Self { x, x_prime, s, c })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Ground truth retained by synthetic annotators for oracle checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTruth {
    pub p: f64,
    pub p_prime: f64,
    pub y: Label,
    pub y_prime: Label,
}

/// Ordered collection of weak pairs sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset<T> {
    pairs: Vec<WeakPair<T>>,
    dim: usize,
    truth: Option<Vec<PairTruth>>,
}

impl<T: Scalar> PairDataset<T> {
    pub fn new(pairs: Vec<WeakPair<T>>) -> Result<Self> {
        let first = pairs.first().ok_or(Error::EmptyDataset)?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::param("dim", "feature dimension must be positive"));
        }
        for p in &pairs {
            if p.x.len() != dim || p.x_prime.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: p.x.len().max(p.x_prime.len()) });
            }
        }
        Ok(Self { pairs, dim, truth: None })
    }

    pub fn with_truth(mut self, truth: Vec<PairTruth>) -> Result<Self> {
        if truth.len() != self.pairs.len() {
            return Err(Error::param("truth", "one record per pair required"));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn pairs(&self) -> &[WeakPair<T>] {
        &self.pairs
    }

    pub fn truth(&self) -> Option<&[PairTruth]> {
        self.truth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Copy of the pairs at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let pairs = indices.iter().map(|&i| self.pairs[i].clone()).collect();
        let mut out = Self::new(pairs)?;
        if let Some(t) = &self.truth {
            out.truth = Some(indices.iter().map(|&i| t[i]).collect());
        }
        Ok(out)
    }

    /// The first `k` pairs.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..k.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Feature matrix with every `x` row followed by every `x'` row
    /// (`2n x dim`).
    pub fn stacked_features(&self) -> Array2<T> {
        let n = self.len();
        let mut m = Array2::zeros((2 * n, self.dim));
        for (i, p) in self.pairs.iter().enumerate() {
            for j in 0..self.dim {
                m[[i, j]] = p.x[j];
                m[[n + i, j]] = p.x_prime[j];
            }
        }
        m
    }

    /// Replaces the weak labels while keeping features and truth.
    pub fn map_labels(&self, mut f: impl FnMut(usize, T, T) -> (T, T)) -> Self {
        let pairs = self
            .pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (s, c) = f(i, p.s, p.c);
                WeakPair { x: p.x.clone(), x_prime: p.x_prime.clone(), s, c }
            })
            .collect();
        Self { pairs, dim: self.dim, truth: self.truth.clone() }
    }
}

/// Fully labeled examples, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    features: Array2<T>,
    labels: Vec<Label>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(features: Array2<T>, labels: Vec<Label>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.nrows(), actual: labels.len() });
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l == Label::Pos).count() as f64 / self.labels.len() as f64
    }
}
