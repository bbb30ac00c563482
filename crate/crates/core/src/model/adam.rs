use serde::{Deserialize, Serialize};

use super::{Dense, Gradients, Mlp};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient added to the gradient before the moment update.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-5 }
    }
}

/// Adam with classic (coupled) L2 weight decay and bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Dense<T>>,
    v: Vec<Dense<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &Mlp<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Dense<T>> = model.layers().iter().map(|l| Dense::zeros(l.weight.nrows(), l.weight.ncols())).collect();
        Self { config, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, model: &mut Mlp<T>, grads: &Gradients<T>) {
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (lr, eps, wd) = (T::of(c.lr), T::of(c.eps), T::of(c.weight_decay));
        let t = self.step as i32;
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        let one = T::one();

        let update = |theta: &mut T, g: T, m: &mut T, v: &mut T| {
            let g = g + wd * *theta;
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        };

        for (((layer, g), m), v) in model.layers_mut().iter_mut().zip(&grads.layers).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut layer.weight)
                .and(&g.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .for_each(|th, &gr, mm, vv| update(th, gr, mm, vv));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|th, &gr, mm, vv| update(th, gr, mm, vv));
        }
    }
}
