//! Synthetic two-Gaussian task, pair annotation and dataset I/O.

mod io;
mod noise;
mod probe;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::pairs::{weak_labels_from_posteriors, ClassPrior, Label, LabeledDataset, PairDataset, PairTruth, PosteriorPair, WeakPair};
use crate::seeding::{self, stream};

pub use io::{load_csv, read_labeled_csv, read_pairs_csv, write_labeled_csv, write_pairs_csv, load_pairs_csv, save_labeled_csv, save_pairs_csv};
pub use noise::{corrupt, NoiseConfig};
pub use probe::LogisticProbe;

/// Smallest class prior a generator accepts; below it one class is
/// practically never sampled.
pub const MIN_CLASS_MASS: f64 = 1e-6;

/// Parameters of a two-class isotropic Gaussian task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub pi_plus: f64,
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
    pub sigma: f64,
}

impl TaskSpec {
    /// `mu = +-(2, 0)`, `sigma = 1`.
    pub fn canonical(pi_plus: f64) -> Self {
        Self { pi_plus, mu_plus: vec![2.0, 0.0], mu_minus: vec![-2.0, 0.0], sigma: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.mu_plus.len()
    }

    pub fn validate(&self) -> Result<()> {
        ClassPrior::new(self.pi_plus)?;
        if self.pi_plus.min(1.0 - self.pi_plus) < MIN_CLASS_MASS {
            return Err(Error::PriorOutOfRange(self.pi_plus));
        }
        if self.mu_plus.is_empty() {
            return Err(Error::param("mu_plus", "must have at least one coordinate"));
        }
        if self.mu_plus.len() != self.mu_minus.len() {
            return Err(Error::DimensionMismatch { expected: self.mu_plus.len(), actual: self.mu_minus.len() });
        }
        if self.mu_plus.iter().chain(&self.mu_minus).any(|v| !v.is_finite()) {
            return Err(Error::param("mu_plus", "means must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive and finite, got {}", self.sigma)));
        }
        Ok(())
    }

    /// `(||mu_+ - mu_-|| / sigma, ln(pi_+ / pi_-))`.
    fn separation(&self) -> (f64, f64) {
        let d2: f64 = self.mu_plus.iter().zip(&self.mu_minus).map(|(a, b)| (a - b) * (a - b)).sum();
        (d2.sqrt() / self.sigma, (self.pi_plus / (1.0 - self.pi_plus)).ln())
    }

    /// Exact class posterior `P(y = +1 | x)`.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        let two_var = 2.0 * self.sigma * self.sigma;
        let mut log_odds = (self.pi_plus / (1.0 - self.pi_plus)).ln();
        for ((xi, mp), mm) in x.iter().zip(&self.mu_plus).zip(&self.mu_minus) {
            log_odds += ((xi - mm).powi(2) - (xi - mp).powi(2)) / two_var;
        }
        if log_odds >= 0.0 {
            1.0 / (1.0 + (-log_odds).exp())
        } else {
            let e = log_odds.exp();
            e / (1.0 + e)
        }
    }

    /// Accuracy of the Bayes classifier (ties predict +1).
    pub fn bayes_accuracy(&self) -> f64 {
        let (delta, l) = self.separation();
        if delta == 0.0 {
            return if l >= 0.0 { self.pi_plus } else { 1.0 - self.pi_plus };
        }
        let phi = Normal::standard();
        self.pi_plus * phi.cdf(delta / 2.0 + l / delta) + (1.0 - self.pi_plus) * phi.cdf(delta / 2.0 - l / delta)
    }
}

/// Seeded sampler for a [`TaskSpec`]. Owns its RNG; not shared across threads.
#[derive(Debug, Clone)]
pub struct TaskGenerator {
    spec: TaskSpec,
    prior: ClassPrior<f64>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl TaskGenerator {
    pub fn new(spec: TaskSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let prior = ClassPrior::new(spec.pi_plus)?;
        Ok(Self { spec, prior, seed, rng: seeding::rng_for(seed, 0, 0) })
    }

    /// Independent generator for the same task, keyed by `(stream, index)`.
    pub fn fork(&self, stream: u64, index: u64) -> Self {
        let seed = seeding::derive_seed(self.seed, stream, index);
        Self { spec: self.spec.clone(), prior: self.prior, seed, rng: seeding::rng_for(seed, 0, 0) }
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn prior(&self) -> ClassPrior<f64> {
        self.prior
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn posterior(&self, x: &[f64]) -> f64 {
        self.spec.posterior(x)
    }

    pub fn bayes_accuracy(&self) -> f64 {
        self.spec.bayes_accuracy()
    }

    fn draw_label(&mut self) -> Label {
        if self.rng.random::<f64>() < self.spec.pi_plus {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    fn draw_point(&mut self, y: Label, out: &mut Vec<f64>) {
        let mu = if y == Label::Pos { &self.spec.mu_plus } else { &self.spec.mu_minus };
        out.clear();
        for &m in mu {
            let z: f64 = self.rng.sample(StandardNormal);
            out.push(m + self.spec.sigma * z);
        }
    }

    /// One `(x, y)` draw from the joint density.
    pub fn draw(&mut self) -> (Vec<f64>, Label) {
        let y = self.draw_label();
        let mut x = Vec::with_capacity(self.dim());
        self.draw_point(y, &mut x);
        (x, y)
    }

    pub fn sample_labeled(&mut self, n: usize) -> Result<LabeledDataset<f64>> {
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        let d = self.dim();
        let mut flat = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        let mut buf = Vec::with_capacity(d);
        for _ in 0..n {
            let y = self.draw_label();
            self.draw_point(y, &mut buf);
            flat.extend_from_slice(&buf);
            labels.push(y);
        }
        let features = ndarray::Array2::from_shape_vec((n, d), flat).expect("shape matches buffer");
        LabeledDataset::new(features, labels)
    }

    /// Draws `2 * n_pairs` points (x then x' for each pair) and labels them
    /// with `annotator`. Truth keeps the exact posteriors and labels.
    pub fn annotate_pairs_with(&mut self, n_pairs: usize, mut annotator: impl FnMut(&[f64]) -> f64) -> Result<PairDataset<f64>> {
        if n_pairs == 0 {
            return Err(Error::param("n_pairs", "must be at least 1"));
        }
        let mut pairs = Vec::with_capacity(n_pairs);
        let mut truth = Vec::with_capacity(n_pairs);
        for _ in 0..n_pairs {
            let (x, y) = self.draw();
            let (xp, yp) = self.draw();
            let (s, c) = weak_labels_from_posteriors(PosteriorPair::new(annotator(&x), annotator(&xp))?)?;
            truth.push(PairTruth { p: self.posterior(&x), p_prime: self.posterior(&xp), y, y_prime: yp });
            pairs.push(WeakPair::new(x, xp, s, c)?);
        }
        PairDataset::new(pairs)?.with_truth(truth)
    }

    /// Pairs labeled from the exact posterior.
    pub fn annotate_pairs_exact(&mut self, n_pairs: usize) -> Result<PairDataset<f64>> {
        let spec = self.spec.clone();
        self.annotate_pairs_with(n_pairs, |x| spec.posterior(x))
    }

    /// Pairs labeled by a logistic-regression probe fitted on `probe_size`
    /// examples. The probe comes from a forked stream, so the pair draws are
    /// the same as those of [`annotate_pairs_exact`](Self::annotate_pairs_exact)
    /// on an identically seeded generator.
    pub fn annotate_pairs_learned(&mut self, n_pairs: usize, probe_size: usize) -> Result<PairDataset<f64>> {
        check_probe_size(probe_size)?;
        let probe_data = self.fork(stream::PROBE, 0).sample_labeled(probe_size)?;
        let probe = LogisticProbe::fit(&probe_data)?;
        self.annotate_pairs_with(n_pairs, |x| probe.posterior(x))
    }
}

fn check_probe_size(probe_size: usize) -> Result<()> {
    if probe_size < 10 {
        return Err(Error::param("probe_size", format!("must be at least 10, got {probe_size}")));
    }
    Ok(())
}

/// Learned annotation of an existing labeled pool: after a seeded shuffle the
/// first `probe_size` rows fit the probe and the next `2 * n_pairs` rows form
/// the pairs. Truth holds the pool labels and the probe posteriors.
pub fn annotate_pool_learned(pool: &LabeledDataset<f64>, n_pairs: usize, probe_size: usize, seed: u64) -> Result<PairDataset<f64>> {
    check_probe_size(probe_size)?;
    if n_pairs == 0 {
        return Err(Error::param("n_pairs", "must be at least 1"));
    }
    let need = probe_size + 2 * n_pairs;
    if pool.len() < need {
        return Err(Error::param("n_pairs", format!("pool has {} rows, {need} needed", pool.len())));
    }
    let order = shuffled_indices(pool.len(), seed);
    let probe_data = select_rows(pool, &order[..probe_size])?;
    let probe = LogisticProbe::fit(&probe_data)?;
    let row = |i: usize| pool.features().row(i).to_vec();
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut truth = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs {
        let (i, j) = (order[probe_size + 2 * k], order[probe_size + 2 * k + 1]);
        let (x, xp) = (row(i), row(j));
        let (p, pp) = (probe.posterior(&x), probe.posterior(&xp));
        let (s, c) = weak_labels_from_posteriors(PosteriorPair::new(p, pp)?)?;
        truth.push(PairTruth { p, p_prime: pp, y: pool.labels()[i], y_prime: pool.labels()[j] });
        pairs.push(WeakPair::new(x, xp, s, c)?);
    }
    PairDataset::new(pairs)?.with_truth(truth)
}

/// Seeded Fisher-Yates permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeding::rng_for(seed, stream::SPLIT, 0));
    idx
}

pub fn select_rows(data: &LabeledDataset<f64>, rows: &[usize]) -> Result<LabeledDataset<f64>> {
    let features = data.features().select(ndarray::Axis(0), rows);
    LabeledDataset::new(features, rows.iter().map(|&i| data.labels()[i]).collect())
}

/// Seeded shuffle, then the first `round(train_fraction * n)` rows go to the
/// first part.
pub fn shuffle_split(data: &LabeledDataset<f64>, train_fraction: f64, seed: u64) -> Result<(LabeledDataset<f64>, LabeledDataset<f64>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param("train_fraction", "must lie in (0, 1)"));
    }
    let idx = shuffled_indices(data.len(), seed);
    let k = ((train_fraction * data.len() as f64).round() as usize).clamp(1, data.len().saturating_sub(1));
    if k == 0 || k == data.len() {
        return Err(Error::param("train_fraction", "split leaves one side empty"));
    }
    Ok((select_rows(data, &idx[..k])?, select_rows(data, &idx[k..])?))
}

#[cfg(test)]
mod tests;
