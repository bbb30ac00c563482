use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::{ClassPrior, PairDataset};
use crate::seeding;

/// Prior misspecification and multiplicative label noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// The learner is told `epsilon * pi_plus`.
    pub epsilon: f64,
    /// Standard deviation of the per-pair factors, drawn from `N(1, sigma^2)`.
    pub sigma_noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseConfig {
    pub fn clean() -> Self {
        Self { epsilon: 1.0, sigma_noise: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(self.sigma_noise.is_finite() && self.sigma_noise >= 0.0) {
            return Err(Error::param("sigma_noise", format!("must be nonnegative, got {}", self.sigma_noise)));
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.epsilon == 1.0 && self.sigma_noise == 0.0
    }
}

/// Returns `(s_i * e'_i, c_i * e''_i)` for every pair, with `e', e''` i.i.d.
/// `N(1, sigma^2)`, and the prior `epsilon * pi_plus`. Noisy labels are not
/// clamped back into their clean ranges.
pub fn corrupt(data: &PairDataset<f64>, prior: &ClassPrior<f64>, cfg: &NoiseConfig) -> Result<(PairDataset<f64>, ClassPrior<f64>)> {
    cfg.validate()?;
    let noisy_prior = ClassPrior::new(cfg.epsilon * prior.pi_plus())?;
    if cfg.sigma_noise == 0.0 {
        return Ok((data.clone(), noisy_prior));
    }
    let mut rng = seeding::rng_for(cfg.seed, seeding::stream::NOISE, 0);
    let sd = cfg.sigma_noise;
    let out = data.map_labels(|_, s, c| {
        let e1 = 1.0 + sd * rng.sample::<f64, _>(StandardNormal);
        let e2 = 1.0 + sd * rng.sample::<f64, _>(StandardNormal);
        (s * e1, c * e2)
    });
    Ok((out, noisy_prior))
}
