//! Fully connected scorers `g: R^d -> R` with ReLU hidden layers.
//!
//! A model with no hidden layer is the linear scorer `w.x + b`.

mod adam;
mod checkpoint;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss::MarginLoss;
use crate::pairs::Label;
use crate::scalar::Scalar;

/// One affine layer, `out = in . weight + bias` with `weight` of shape
/// `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weight: Array2::zeros((fan_in, fan_out)), bias: Array1::zeros(fan_out) }
    }

    fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn get(&self, i: usize) -> T {
        let nw = self.weight.len();
        if i < nw {
            self.weight.as_slice().expect("standard layout")[i]
        } else {
            self.bias[i - nw]
        }
    }

    fn get_mut(&mut self, i: usize) -> &mut T {
        let nw = self.weight.len();
        if i < nw {
            &mut self.weight.as_slice_mut().expect("standard layout")[i]
        } else {
            &mut self.bias[i - nw]
        }
    }
}

/// Parameter-shaped gradient of some scalar objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn flat(&self) -> Vec<T> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend(l.weight.iter().copied());
            v.extend(l.bias.iter().copied());
        }
        v
    }

    pub fn norm(&self) -> T {
        self.flat().iter().map(|&g| g * g).sum::<T>().sqrt()
    }
}

/// Activations kept from a forward pass for backpropagation.
pub struct ForwardCache<T> {
    /// Input of every layer (the batch itself first).
    inputs: Vec<Array2<T>>,
    /// Pre-activations of every hidden layer.
    pre: Vec<Array2<T>>,
    pub scores: Array1<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Smallest `|pre-activation|` over all hidden units and inputs; ReLU
    /// kinks closer than a finite-difference step spoil gradient checks.
    pub fn min_abs_preactivation(&self) -> Option<T> {
        self.pre.iter().flat_map(|z| z.iter()).map(|v| v.abs()).reduce(|a, b| a.min(b))
    }

    /// Which hidden units are active, for every input.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre.iter().flat_map(|z| z.iter()).map(|&v| v > T::zero()).collect()
    }
}

/// Multilayer perceptron with widths `[d, h_1, ..., h_L, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    layers: Vec<Dense<T>>,
    seed: u64,
}

impl<T: Scalar> Mlp<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn new(input_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut m = Self::zeros(input_dim, hidden)?;
        m.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut m.layers {
            let (fan_in, fan_out) = layer.weight.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            layer.weight.mapv_inplace(|_| T::of(rng.random_range(-limit..limit)));
        }
        Ok(m)
    }

    /// All parameters zero; every score is 0.
    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::param("input_dim", "must be positive"));
        }
        if hidden.contains(&0) {
            return Err(Error::param("hidden", "layer widths must be positive"));
        }
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self { widths, layers, seed: 0 })
    }

    /// Linear scorer `w.x + b`.
    pub fn linear(weights: &[T], bias: T) -> Result<Self> {
        let mut m = Self::zeros(weights.len(), &[])?;
        for (i, &w) in weights.iter().enumerate() {
            m.layers[0].weight[[i, 0]] = w;
        }
        m.layers[0].bias[0] = bias;
        Ok(m)
    }

    pub(crate) fn from_parts(widths: Vec<usize>, seed: u64, params: &[T]) -> Result<Self> {
        if widths.len() < 2 || *widths.last().unwrap() != 1 {
            return Err(Error::Checkpoint("widths must end with a single output".into()));
        }
        let mut m = Self::zeros(widths[0], &widths[1..widths.len() - 1])?;
        if params.len() != m.num_params() {
            return Err(Error::Checkpoint(format!("expected {} parameters, found {}", m.num_params(), params.len())));
        }
        m.seed = seed;
        m.set_params(params);
        Ok(m)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::len).sum()
    }

    /// Parameters in checkpoint order: per layer, row-major weights then bias.
    pub fn params(&self) -> Vec<T> {
        Gradients { layers: self.layers.clone() }.flat()
    }

    pub fn set_params(&mut self, params: &[T]) {
        let mut k = 0;
        for l in &mut self.layers {
            for i in 0..l.len() {
                *l.get_mut(i) = params[k];
                k += 1;
            }
        }
    }

    fn locate(&self, mut idx: usize) -> (usize, usize) {
        for (li, l) in self.layers.iter().enumerate() {
            if idx < l.len() {
                return (li, idx);
            }
            idx -= l.len();
        }
        panic!("parameter index out of range");
    }

    pub fn param(&self, idx: usize) -> T {
        let (l, i) = self.locate(idx);
        self.layers[l].get(i)
    }

    pub fn set_param(&mut self, idx: usize, value: T) {
        let (l, i) = self.locate(idx);
        *self.layers[l].get_mut(i) = value;
    }

    fn check_dim(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), actual: x.ncols() });
        }
        Ok(())
    }

    /// Scores of every row of `x`.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        Ok(self.forward_cached(x)?.scores)
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> Result<ForwardCache<T>> {
        self.check_dim(&x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weight) + &layer.bias;
            inputs.push(a);
            if i == last {
                let scores = z.index_axis_move(Axis(1), 0);
                return Ok(ForwardCache { inputs, pre, scores });
            }
            a = z.mapv(|v| v.max(T::zero()));
            pre.push(z);
        }
        unreachable!("model has at least one layer")
    }

    /// Gradient of `sum_j upstream_j * g(x_j)` with respect to the
    /// parameters.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: ArrayView1<T>) -> Result<Gradients<T>> {
        let m = cache.scores.len();
        if upstream.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: upstream.len() });
        }
        let mut grads: Vec<Dense<T>> = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned().insert_axis(Axis(1));
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            let gw = input.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense { weight: gw, bias: gb });
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weight.t());
                ndarray::Zip::from(&mut back).and(&cache.pre[i - 1]).for_each(|d, &z| {
                    if z <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Gradient of `sum_j (w_pos_j l(g(x_j),+1) + w_neg_j l(g(x_j),-1))`.
    pub fn backward_weighted<L: MarginLoss<T> + ?Sized>(
        &self,
        x: ArrayView2<T>,
        w_pos: &[T],
        w_neg: &[T],
        loss: &L,
    ) -> Result<Gradients<T>> {
        let cache = self.forward_cached(x)?;
        let m = cache.scores.len();
        if w_pos.len() != m || w_neg.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: w_pos.len().min(w_neg.len()) });
        }
        let mut up = Array1::zeros(m);
        for j in 0..m {
            let z = cache.scores[j];
            let dp = loss.derivative(z, Label::Pos).ok_or_else(|| Error::param("loss", "not differentiable"))?;
            let dn = loss.derivative(z, Label::Neg).ok_or_else(|| Error::param("loss", "not differentiable"))?;
            up[j] = w_pos[j] * dp + w_neg[j] * dn;
        }
        self.backward(&cache, up.view())
    }
}
