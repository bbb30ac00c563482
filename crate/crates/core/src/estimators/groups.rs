//! Every estimator is a weighted sum of components; each component is a sum
//! of correction-wrapped partial sums ("groups"); each group is a linear
//! combination of the four per-pair loss slots.
//!
//! ```text
//! risk = sum_c  weight_c * sum_g f_c( sum_i <coef_{c,g,i}, losses_i> )
//! ```
//!
//! Gradient weights are read off the same structure:
//! `w_i = sum_c weight_c * sum_g f_c'(S_{c,g}) coef_{c,g,i}`.

use super::{Correction, PairLoss, PairTermWeights};
use crate::pairs::{ClassPrior, Label, PairDataset, PairTruth};
use crate::scalar::{pairwise_sum, Scalar};

/// Slot order: l(g(x),+1), l(g(x),-1), l(g(x'),+1), l(g(x'),-1).
pub(crate) type Coef<T> = [T; 4];

pub(crate) const POS_X: usize = 0;
pub(crate) const NEG_X: usize = 1;
pub(crate) const POS_XP: usize = 2;
pub(crate) const NEG_XP: usize = 3;

pub(crate) struct Group<T> {
    pub coef: Vec<Coef<T>>,
}

impl<T: Scalar> Group<T> {
    fn single_slot(slot: usize, values: impl Iterator<Item = T>) -> Self {
        let coef = values
            .map(|v| {
                let mut c = [T::zero(); 4];
                c[slot] = v;
                c
            })
            .collect();
        Self { coef }
    }

    pub fn partial_sum(&self, losses: &[PairLoss<T>]) -> T {
        let terms: Vec<T> = self
            .coef
            .iter()
            .zip(losses)
            .map(|(c, l)| {
                let l = l.as_array();
                c[0] * l[0] + c[1] * l[1] + c[2] * l[2] + c[3] * l[3]
            })
            .collect();
        pairwise_sum(&terms)
    }
}

pub(crate) struct Component<T> {
    pub weight: T,
    pub correction: Correction,
    pub groups: Vec<Group<T>>,
}

impl<T: Scalar> Component<T> {
    pub fn partial_sums(&self, losses: &[PairLoss<T>]) -> Vec<T> {
        self.groups.iter().map(|g| g.partial_sum(losses)).collect()
    }

    pub fn value(&self, losses: &[PairLoss<T>]) -> T {
        let mut acc = T::zero();
        for s in self.partial_sums(losses) {
            acc += self.correction.apply(s);
        }
        acc
    }
}

pub(crate) fn evaluate<T: Scalar>(components: &[Component<T>], losses: &[PairLoss<T>]) -> T {
    if let [only] = components {
        return only.weight * only.value(losses);
    }
    let mut acc = T::zero();
    for c in components {
        acc += c.weight * c.value(losses);
    }
    acc
}

pub(crate) fn term_weights<T: Scalar>(
    components: &[Component<T>],
    losses: &[PairLoss<T>],
) -> Vec<PairTermWeights<T>> {
    let n = losses.len();
    let mut w = vec![[T::zero(); 4]; n];
    for comp in components {
        for g in &comp.groups {
            let slope = match comp.correction {
                Correction::None => T::one(),
                corr => corr.slope(g.partial_sum(losses)),
            };
            let scale = comp.weight * slope;
            if scale == T::zero() {
                continue;
            }
            for (wi, ci) in w.iter_mut().zip(&g.coef) {
                for k in 0..4 {
                    wi[k] += scale * ci[k];
                }
            }
        }
    }
    w.into_iter().map(PairTermWeights::from_array).collect()
}

/// Sconf estimator split into its positive-label and negative-label sums.
pub(crate) fn sconf_groups<T: Scalar>(data: &PairDataset<T>, prior: &ClassPrior<T>) -> Vec<Group<T>> {
    let (pp, pm) = (prior.pi_plus(), prior.pi_minus());
    let denom = T::of(2.0) * T::of(data.len() as f64) * (pp - pm);
    let pos = data
        .pairs()
        .iter()
        .map(|p| {
            let w = (p.s - pm) / denom;
            [w, T::zero(), w, T::zero()]
        })
        .collect();
    let neg = data
        .pairs()
        .iter()
        .map(|p| {
            let w = (pp - p.s) / denom;
            [T::zero(), w, T::zero(), w]
        })
        .collect();
    vec![Group { coef: pos }, Group { coef: neg }]
}

/// ConfDiff estimator as four single-slot sums.
pub(crate) fn confdiff_groups<T: Scalar>(data: &PairDataset<T>, prior: &ClassPrior<T>) -> Vec<Group<T>> {
    let (pp, pm) = (prior.pi_plus(), prior.pi_minus());
    let norm = T::of(2.0) * T::of(data.len() as f64);
    let ps = data.pairs();
    vec![
        Group::single_slot(POS_X, ps.iter().map(|p| (pp - p.c) / norm)),
        Group::single_slot(NEG_XP, ps.iter().map(|p| (pm - p.c) / norm)),
        Group::single_slot(POS_XP, ps.iter().map(|p| (pp + p.c) / norm)),
        Group::single_slot(NEG_X, ps.iter().map(|p| (pm + p.c) / norm)),
    ]
}

/// Coefficients of the joint pair loss `L(x, x')` and its reverse.
///
/// Returns `(a, b, cc, d)` multiplying `l(g(x),+1)`, `l(g(x'),-1)`,
/// `l(g(x'),+1)`, `l(g(x),-1)` respectively; `a, b` form the forward loss and
/// `cc, d` the reverse one.
#[inline]
pub(crate) fn scd_coefficients<T: Scalar>(s: T, c: T, prior: &ClassPrior<T>) -> (T, T, T, T) {
    let (pp, pm) = (prior.pi_plus(), prior.pi_minus());
    let two = T::of(2.0);
    let a = two * pp * (pp - c) + pm - s;
    let b = two * pm * (pm - c) + pp - s;
    let cc = two * pp * (pp + c) + pm - s;
    let d = two * pm * (pm + c) + pp - s;
    (a, b, cc, d)
}

/// Joint estimator groups A, B (forward, weight `lambda`) and C, D (reverse,
/// weight `1 - lambda`), each already divided by `n`.
pub(crate) fn scd_groups<T: Scalar>(data: &PairDataset<T>, prior: &ClassPrior<T>, lambda: T) -> Vec<Group<T>> {
    let n = T::of(data.len() as f64);
    let fwd = lambda / n;
    let rev = (T::one() - lambda) / n;
    let coefs: Vec<_> = data.pairs().iter().map(|p| scd_coefficients(p.s, p.c, prior)).collect();
    vec![
        Group::single_slot(POS_X, coefs.iter().map(|k| k.0 * fwd)),
        Group::single_slot(NEG_XP, coefs.iter().map(|k| k.1 * fwd)),
        Group::single_slot(POS_XP, coefs.iter().map(|k| k.2 * rev)),
        Group::single_slot(NEG_X, coefs.iter().map(|k| k.3 * rev)),
    ]
}

/// Ordinary supervised risk over both points of every pair.
pub(crate) fn supervised_groups<T: Scalar>(truth: &[PairTruth]) -> Vec<Group<T>> {
    let w = T::one() / (T::of(2.0) * T::of(truth.len() as f64));
    let coef = truth
        .iter()
        .map(|t| {
            let mut c = [T::zero(); 4];
            c[if t.y == Label::Pos { POS_X } else { NEG_X }] = w;
            c[if t.y_prime == Label::Pos { POS_XP } else { NEG_XP }] = w;
            c
        })
        .collect();
    vec![Group { coef }]
}
