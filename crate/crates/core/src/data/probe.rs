use ndarray::Array1;

use crate::error::{Error, Result};
use crate::pairs::{Label, LabeledDataset};

const MAX_STEPS: usize = 10_000;
const GRAD_TOL: f64 = 1e-6;

/// Linear logistic regression `P(y=+1|x) = sigmoid(w.x + b)` fitted by
/// full-batch gradient descent on the mean logistic loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub steps: usize,
    pub grad_norm: f64,
}

impl LogisticProbe {
    /// Runs until the gradient norm drops below 1e-6 or 10^4 steps. The step
    /// size is the inverse of a bound on the Hessian's largest eigenvalue.
    pub fn fit(data: &LabeledDataset<f64>) -> Result<Self> {
        let pos = data.labels().iter().filter(|&&l| l == Label::Pos).count();
        if pos == 0 || pos == data.len() {
            return Err(Error::DegenerateProbe);
        }
        let x = data.features();
        let n = data.len() as f64;
        let y: Array1<f64> = data.labels().iter().map(|l| l.sign::<f64>()).collect();
        let mean_sq: f64 = x.rows().into_iter().map(|r| r.dot(&r) + 1.0).sum::<f64>() / n;
        let lr = 4.0 / mean_sq;

        let mut w = Array1::<f64>::zeros(data.dim());
        let mut b = 0.0;
        let mut steps = 0;
        let mut grad_norm = f64::INFINITY;
        while steps < MAX_STEPS {
            let margin = (x.dot(&w) + b) * &y;
            // d/dz ln(1 + e^{-yz}) = -y sigmoid(-yz)
            let coef: Array1<f64> = margin.iter().zip(&y).map(|(&m, &yi)| -yi * sigmoid(-m) / n).collect();
            let gw = x.t().dot(&coef);
            let gb = coef.sum();
            grad_norm = (gw.dot(&gw) + gb * gb).sqrt();
            if grad_norm < GRAD_TOL {
                break;
            }
            w.scaled_add(-lr, &gw);
            b -= lr * gb;
            steps += 1;
        }
        Ok(Self { weights: w.to_vec(), bias: b, steps, grad_norm })
    }

    pub fn posterior(&self, x: &[f64]) -> f64 {
        let z: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias;
        sigmoid(z)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
