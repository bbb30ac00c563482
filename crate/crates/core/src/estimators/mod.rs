//! Empirical risk estimators over weakly labeled pairs.
//!
//! Estimators consume precomputed per-point losses ([`PairLosses`]) rather
//! than a model, so the same code serves evaluation, training and the
//! Monte-Carlo checks. Each estimator also exposes per-point label weights
//! ([`TermWeights`]) for backpropagation.

mod groups;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::MarginLoss;
use crate::pairs::{ClassPrior, Label, PairDataset, WeakPair};
use crate::scalar::Scalar;
use groups::Component;

/// Model outputs `g(x_i)` and `g(x_i')` for every pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScores<T> {
    pub x: Vec<T>,
    pub x_prime: Vec<T>,
}

impl<T: Scalar> PairScores<T> {
    /// Splits scores produced on [`PairDataset::stacked_features`].
    pub fn from_stacked(stacked: &[T]) -> Self {
        let n = stacked.len() / 2;
        Self { x: stacked[..n].to_vec(), x_prime: stacked[n..2 * n].to_vec() }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// The four loss values of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairLoss<T> {
    pub pos_x: T,
    pub neg_x: T,
    pub pos_xp: T,
    pub neg_xp: T,
}

impl<T: Scalar> PairLoss<T> {
    pub fn constant(k: T) -> Self {
        Self { pos_x: k, neg_x: k, pos_xp: k, neg_xp: k }
    }

    pub(crate) fn as_array(&self) -> [T; 4] {
        [self.pos_x, self.neg_x, self.pos_xp, self.neg_xp]
    }
}

/// Per-pair loss values for a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLosses<T>(pub Vec<PairLoss<T>>);

impl<T: Scalar> PairLosses<T> {
    pub fn evaluate<L: MarginLoss<T> + ?Sized>(loss: &L, scores: &PairScores<T>) -> Self {
        let v = scores
            .x
            .iter()
            .zip(&scores.x_prime)
            .map(|(&z, &zp)| PairLoss {
                pos_x: loss.value(z, Label::Pos),
                neg_x: loss.value(z, Label::Neg),
                pos_xp: loss.value(zp, Label::Pos),
                neg_xp: loss.value(zp, Label::Neg),
            })
            .collect();
        Self(v)
    }

    pub fn constant(n: usize, k: T) -> Self {
        Self(vec![PairLoss::constant(k); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weights multiplying each loss slot of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairTermWeights<T> {
    pub w_pos_x: T,
    pub w_neg_x: T,
    pub w_pos_xp: T,
    pub w_neg_xp: T,
}

impl<T: Scalar> PairTermWeights<T> {
    fn from_array(a: [T; 4]) -> Self {
        Self { w_pos_x: a[0], w_neg_x: a[1], w_pos_xp: a[2], w_neg_xp: a[3] }
    }
}

/// Per-pair weights such that an uncorrected risk equals
/// `sum_i <weights_i, losses_i>`; for corrected estimators they are the
/// (sub)gradient of the risk with respect to each loss value.
#[derive(Debug, Clone, PartialEq)]
pub struct TermWeights<T>(pub Vec<PairTermWeights<T>>);

impl<T: Scalar> TermWeights<T> {
    /// `sum_i <weights_i, losses_i>`.
    pub fn weighted_sum(&self, losses: &PairLosses<T>) -> T {
        let terms: Vec<T> = self
            .0
            .iter()
            .zip(&losses.0)
            .map(|(w, l)| w.w_pos_x * l.pos_x + w.w_neg_x * l.neg_x + w.w_pos_xp * l.pos_xp + w.w_neg_xp * l.neg_xp)
            .collect();
        crate::scalar::pairwise_sum(&terms)
    }

    /// Chain rule into per-score derivatives `(d/dg(x_i), d/dg(x_i'))`.
    pub fn score_gradients<L: MarginLoss<T> + ?Sized>(&self, loss: &L, scores: &PairScores<T>) -> Option<PairScores<T>> {
        let n = self.0.len();
        let mut gx = Vec::with_capacity(n);
        let mut gxp = Vec::with_capacity(n);
        for ((w, &z), &zp) in self.0.iter().zip(&scores.x).zip(&scores.x_prime) {
            gx.push(w.w_pos_x * loss.derivative(z, Label::Pos)? + w.w_neg_x * loss.derivative(z, Label::Neg)?);
            gxp.push(w.w_pos_xp * loss.derivative(zp, Label::Pos)? + w.w_neg_xp * loss.derivative(zp, Label::Neg)?);
        }
        Some(PairScores { x: gx, x_prime: gxp })
    }
}

/// The four partial risks of the corrected joint estimator before the
/// correction function is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedTerms<T> {
    pub a_hat: T,
    pub b_hat: T,
    pub c_hat: T,
    pub d_hat: T,
}

impl<T: Scalar> CorrectedTerms<T> {
    pub fn sum(&self) -> T {
        self.a_hat + self.b_hat + self.c_hat + self.d_hat
    }

    pub fn corrected(&self, f: Correction) -> T {
        f.apply(self.a_hat) + f.apply(self.b_hat) + f.apply(self.c_hat) + f.apply(self.d_hat)
    }
}

/// Function applied to partial risk sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    #[default]
    None,
    Relu,
    Abs,
}

impl Correction {
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Correction::None => z,
            Correction::Relu => z.max(T::zero()),
            Correction::Abs => z.abs(),
        }
    }

    /// Subgradient; 0 at the kink for both ReLU and Abs.
    pub fn slope<T: Scalar>(self, z: T) -> T {
        match self {
            Correction::None => T::one(),
            Correction::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Correction::Abs => {
                if z > T::zero() {
                    T::one()
                } else if z < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Correction::None => "Unbiased",
            Correction::Relu => "ReLU",
            Correction::Abs => "ABS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    Sconf,
    ConfDiff,
    Convex,
    Scd,
    ScdLambda,
    CorrectedScd,
    CorrectedConvex,
    Supervised,
}

/// Estimator selection with its mixing weights and correction function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Sconf weight of the convex combinations.
    pub gamma: f64,
    /// Forward-loss weight of the joint family.
    pub lambda: f64,
    pub correction: Correction,
}

impl EstimatorSpec {
    fn of(kind: EstimatorKind) -> Self {
        Self { kind, gamma: 0.5, lambda: 0.5, correction: Correction::None }
    }

    pub fn sconf() -> Self {
        Self::of(EstimatorKind::Sconf)
    }

    pub fn confdiff() -> Self {
        Self::of(EstimatorKind::ConfDiff)
    }

    pub fn convex(gamma: f64) -> Self {
        Self { gamma, ..Self::of(EstimatorKind::Convex) }
    }

    pub fn scd() -> Self {
        Self::of(EstimatorKind::Scd)
    }

    pub fn scd_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::of(EstimatorKind::ScdLambda) }
    }

    pub fn corrected_scd(correction: Correction) -> Self {
        Self { correction, ..Self::of(EstimatorKind::CorrectedScd) }
    }

    pub fn corrected_convex(gamma: f64, correction: Correction) -> Self {
        Self { gamma, correction, ..Self::of(EstimatorKind::CorrectedConvex) }
    }

    pub fn supervised() -> Self {
        Self::of(EstimatorKind::Supervised)
    }

    pub fn is_corrected(&self) -> bool {
        matches!(self.kind, EstimatorKind::CorrectedScd | EstimatorKind::CorrectedConvex)
    }

    /// Whether the Sconf denominator `pi_plus - pi_minus` is involved.
    pub fn uses_sconf(&self) -> bool {
        match self.kind {
            EstimatorKind::Sconf => true,
            EstimatorKind::Convex | EstimatorKind::CorrectedConvex => self.gamma > 0.0,
            _ => false,
        }
    }

    /// The correction actually in effect (`None` for unbiased kinds).
    pub fn effective_correction(&self) -> Correction {
        if self.is_corrected() {
            self.correction
        } else {
            Correction::None
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::param("gamma", format!("{} is outside [0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param("lambda", format!("{} is outside [0, 1]", self.lambda)));
        }
        Ok(())
    }

    pub fn validate_for<T: Scalar>(&self, prior: &ClassPrior<T>) -> Result<()> {
        self.validate()?;
        if self.uses_sconf() && prior.is_balanced() {
            return Err(Error::PriorDegenerate(prior.pi_plus().as_f64()));
        }
        Ok(())
    }

    /// Human-readable name, e.g. `SCD-ABS` or `Convex(γ=0.5)-ReLU`.
    pub fn label(&self) -> String {
        let corr = self.effective_correction().suffix();
        match self.kind {
            EstimatorKind::Sconf => format!("Sconf-{corr}"),
            EstimatorKind::ConfDiff => format!("ConfDiff-{corr}"),
            EstimatorKind::Convex | EstimatorKind::CorrectedConvex => format!("Convex(γ={})-{corr}", self.gamma),
            EstimatorKind::Scd | EstimatorKind::CorrectedScd => format!("SCD-{corr}"),
            EstimatorKind::ScdLambda => format!("SCD-λ({})", self.lambda),
            EstimatorKind::Supervised => "Supervised".to_string(),
        }
    }

    fn components<T: Scalar>(&self, data: &PairDataset<T>, prior: &ClassPrior<T>) -> Result<Vec<Component<T>>> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        self.validate_for(prior)?;
        let correction = self.effective_correction();
        let one = |groups| vec![Component { weight: T::one(), correction, groups }];
        let comps = match self.kind {
            EstimatorKind::Sconf => one(groups::sconf_groups(data, prior)),
            EstimatorKind::ConfDiff => one(groups::confdiff_groups(data, prior)),
            EstimatorKind::Convex | EstimatorKind::CorrectedConvex => {
                let gamma = T::of(self.gamma);
                let mut v = Vec::with_capacity(2);
                if self.gamma > 0.0 {
                    v.push(Component { weight: gamma, correction, groups: groups::sconf_groups(data, prior) });
                }
                if self.gamma < 1.0 {
                    v.push(Component {
                        weight: T::one() - gamma,
                        correction,
                        groups: groups::confdiff_groups(data, prior),
                    });
                }
                v
            }
            EstimatorKind::Scd | EstimatorKind::CorrectedScd => one(groups::scd_groups(data, prior, T::of(0.5))),
            EstimatorKind::ScdLambda => one(groups::scd_groups(data, prior, T::of(self.lambda))),
            EstimatorKind::Supervised => {
                let truth = data.truth().ok_or_else(|| Error::MissingLabels(self.label()))?;
                one(groups::supervised_groups(truth))
            }
        };
        Ok(comps)
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses the configuration names `sconf`, `confdiff`, `convex`, `scd`,
/// `scd-lambda`, `supervised`, and the corrected forms `<base>-relu` /
/// `<base>-abs` for `sconf`, `confdiff`, `convex` and `scd`. Corrected
/// `sconf`/`confdiff` are the convex combination at gamma 1 and 0.
///
/// Mixing weights default to 0.5; set them on the returned value.
impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        let (base, correction) = match lower.rsplit_once('-') {
            Some((b, "relu")) => (b, Correction::Relu),
            Some((b, "abs")) => (b, Correction::Abs),
            Some((b, "unbiased")) => (b, Correction::None),
            _ => (lower.as_str(), Correction::None),
        };
        let spec = match (base, correction) {
            ("sconf", Correction::None) => Self::sconf(),
            ("confdiff", Correction::None) => Self::confdiff(),
            ("convex", Correction::None) => Self::convex(0.5),
            ("scd", Correction::None) => Self::scd(),
            ("scd-lambda", Correction::None) => Self::scd_lambda(0.5),
            ("supervised", Correction::None) => Self::supervised(),
            ("sconf", f) => Self::corrected_convex(1.0, f),
            ("confdiff", f) => Self::corrected_convex(0.0, f),
            ("convex", f) => Self::corrected_convex(0.5, f),
            ("scd", f) => Self::corrected_scd(f),
            _ => return Err(Error::param("estimator", format!("unknown estimator `{name}`"))),
        };
        Ok(spec)
    }
}

fn check_len<T>(data: &PairDataset<T>, losses: &PairLosses<T>) -> Result<()>
where
    T: Scalar,
{
    if data.len() != losses.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), actual: losses.len() });
    }
    Ok(())
}

/// Risk of `spec` on `data` given per-pair losses.
pub fn evaluate<T: Scalar>(
    spec: &EstimatorSpec,
    data: &PairDataset<T>,
    prior: &ClassPrior<T>,
    losses: &PairLosses<T>,
) -> Result<T> {
    check_len(data, losses)?;
    let comps = spec.components(data, prior)?;
    Ok(groups::evaluate(&comps, &losses.0))
}

/// Convenience wrapper: evaluates the loss on `scores` first.
pub fn evaluate_scores<T: Scalar, L: MarginLoss<T> + ?Sized>(
    spec: &EstimatorSpec,
    data: &PairDataset<T>,
    prior: &ClassPrior<T>,
    loss: &L,
    scores: &PairScores<T>,
) -> Result<T> {
    evaluate(spec, data, prior, &PairLosses::evaluate(loss, scores))
}

/// Label weights of `spec` for backpropagation.
pub fn term_weights<T: Scalar>(
    spec: &EstimatorSpec,
    data: &PairDataset<T>,
    prior: &ClassPrior<T>,
    losses: &PairLosses<T>,
) -> Result<TermWeights<T>> {
    check_len(data, losses)?;
    let comps = spec.components(data, prior)?;
    Ok(TermWeights(groups::term_weights(&comps, &losses.0)))
}

/// Risk together with its label weights, sharing one construction.
pub fn evaluate_with_weights<T: Scalar>(
    spec: &EstimatorSpec,
    data: &PairDataset<T>,
    prior: &ClassPrior<T>,
    losses: &PairLosses<T>,
) -> Result<(T, TermWeights<T>)> {
    check_len(data, losses)?;
    let comps = spec.components(data, prior)?;
    Ok((groups::evaluate(&comps, &losses.0), TermWeights(groups::term_weights(&comps, &losses.0))))
}

pub fn sconf_risk<T: Scalar>(data: &PairDataset<T>, prior: &ClassPrior<T>, losses: &PairLosses<T>) -> Result<T> {
    evaluate(&EstimatorSpec::sconf(), data, prior, losses)
}

pub fn confdiff_risk<T: Scalar>(data: &PairDataset<T>, prior: &ClassPrior<T>, losses: &PairLosses<T>) -> Result<T> {
    evaluate(&EstimatorSpec::confdiff(), data, prior, losses)
}

/// `gamma * sconf + (1 - gamma) * confdiff`.
pub fn convex_risk<T: Scalar>(
    data: &PairDataset<T>,
    prior: &ClassPrior<T>,
    losses: &PairLosses<T>,
    gamma: f64,
) -> Result<T> {
    evaluate(&EstimatorSpec::convex(gamma), data, prior, losses)
}

pub fn scd_risk<T: Scalar>(data: &PairDataset<T>, prior: &ClassPrior<T>, losses: &PairLosses<T>) -> Result<T> {
    evaluate(&EstimatorSpec::scd(), data, prior, losses)
}

pub fn scd_risk_lambda<T: Scalar>(
    data: &PairDataset<T>,
    prior: &ClassPrior<T>,
    losses: &PairLosses<T>,
    lambda: f64,
) -> Result<T> {
    evaluate(&EstimatorSpec::scd_lambda(lambda), data, prior, losses)
}

/// Joint pair loss `L(x, x')` and its reverse `L(x', x)`.
pub fn scd_pair_loss<T: Scalar>(pair: &WeakPair<T>, prior: &ClassPrior<T>, loss: &PairLoss<T>) -> (T, T) {
    let (a, b, c, d) = groups::scd_coefficients(pair.s, pair.c, prior);
    (a * loss.pos_x + b * loss.neg_xp, c * loss.pos_xp + d * loss.neg_x)
}

/// Corrected joint risk `f(A) + f(B) + f(C) + f(D)` and the raw partial sums.
pub fn corrected_scd_risk<T: Scalar>(
    data: &PairDataset<T>,
    prior: &ClassPrior<T>,
    losses: &PairLosses<T>,
    correction: Correction,
) -> Result<(T, CorrectedTerms<T>)> {
    check_len(data, losses)?;
    let spec = EstimatorSpec::corrected_scd(correction);
    let comps = spec.components(data, prior)?;
    let s = comps[0].partial_sums(&losses.0);
    let terms = CorrectedTerms { a_hat: s[0], b_hat: s[1], c_hat: s[2], d_hat: s[3] };
    Ok((groups::evaluate(&comps, &losses.0), terms))
}

/// `gamma * corrected Sconf + (1 - gamma) * corrected ConfDiff`, with the
/// correction applied to two Sconf sums and four ConfDiff sums.
pub fn corrected_convex_risk<T: Scalar>(
    data: &PairDataset<T>,
    prior: &ClassPrior<T>,
    losses: &PairLosses<T>,
    gamma: f64,
    correction: Correction,
) -> Result<T> {
    evaluate(&EstimatorSpec::corrected_convex(gamma, correction), data, prior, losses)
}

/// Partial sums of every group of `spec`, in construction order.
pub fn partial_sums<T: Scalar>(
    spec: &EstimatorSpec,
    data: &PairDataset<T>,
    prior: &ClassPrior<T>,
    losses: &PairLosses<T>,
) -> Result<Vec<T>> {
    check_len(data, losses)?;
    let comps = spec.components(data, prior)?;
    Ok(comps.iter().flat_map(|c| c.partial_sums(&losses.0)).collect())
}
