//! Fully connected ReLU network `t -> share` with a linear output unit.
//!
//! Hidden layer `i` computes `h^i = relu(W^i h^(i-1) + b^i)` from `h^0 = t`;
//! the output is `w^(m+1) . h^m + b^(m+1)`. The ReLU derivative is taken as
//! 1 for positive pre-activations and 0 otherwise, including at zero.

mod net;
mod train;

pub use net::{forward, jacobian, min_abs_pre_activation, time_derivative};
pub use train::{lm_train, Init, StopReason, Surrogate, TrainConfig, TrainReport};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Layer widths `1 -> hidden_widths... -> 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_width: usize,
    pub hidden_widths: Vec<usize>,
    pub output_width: usize,
}

impl MlpSpec {
    /// At least two hidden layers, all widths positive.
    pub fn new(hidden_widths: Vec<usize>) -> Result<Self> {
        let spec = Self {
            input_width: 1,
            hidden_widths,
            output_width: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width != 1 || self.output_width != 1 {
            return Err(Error::ShapeMismatch(format!(
                "network maps time to share: widths must be 1 -> .. -> 1, got {} -> .. -> {}",
                self.input_width, self.output_width
            )));
        }
        if self.hidden_widths.len() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "need at least two hidden layers, got {}",
                self.hidden_widths.len()
            )));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::ShapeMismatch("hidden widths must be >= 1".into()));
        }
        Ok(())
    }

    /// `(inputs, outputs)` of every affine layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_width];
        widths.extend(&self.hidden_widths);
        widths.push(self.output_width);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| o * i + o).sum()
    }
}

/// One affine layer, `weights` row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer<T> {
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> MlpWeights<T> {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            layers: spec
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Layer {
                    weights: vec![T::zero(); i * o],
                    biases: vec![T::zero(); o],
                })
                .collect(),
        }
    }

    /// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        Self {
            layers: spec
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| {
                    let limit = (6.0 / (i + o) as f64).sqrt();
                    Layer {
                        weights: (0..i * o)
                            .map(|_| T::lit(rng.random_range(-limit..limit)))
                            .collect(),
                        biases: vec![T::zero(); o],
                    }
                })
                .collect(),
        }
    }

    /// Linear-spline start: first-layer unit `k` of `K` is the hinge
    /// `max(t - k / K, 0)` and intermediate hidden layers pass the
    /// leading units through unchanged. The last hidden layer and the
    /// output layer keep Glorot and zero weights until
    /// [`MlpWeights::fit_spline`] installs a fit.
    pub fn hinge_basis<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        let mut w = Self::glorot(spec, rng);
        let hidden = spec.hidden_widths.len();
        for (idx, layer) in w.layers.iter_mut().enumerate() {
            let out = layer.biases.len();
            let fan_in = layer.weights.len() / out;
            if idx == 0 {
                for k in 0..out {
                    for j in 0..fan_in {
                        layer.weights[k * fan_in + j] = if j == 0 { T::one() } else { T::zero() };
                    }
                    layer.biases[k] = -T::from_usize_lossy(k) / T::from_usize_lossy(out);
                }
            } else if idx + 1 < hidden {
                for k in 0..out.min(fan_in) {
                    for j in 0..fan_in {
                        layer.weights[k * fan_in + j] = if j == k { T::one() } else { T::zero() };
                    }
                }
            } else if idx + 1 == hidden + 1 {
                layer.weights.iter_mut().for_each(|v| *v = T::zero());
            }
        }
        w
    }

    /// Hidden activations feeding layer `upto` at scalar input `t`.
    fn features(&self, upto: usize, t: T) -> Vec<T> {
        let mut h = vec![t];
        for layer in &self.layers[..upto] {
            let fan_in = h.len();
            h = layer
                .biases
                .iter()
                .enumerate()
                .map(|(k, &b)| {
                    layer.weights[k * fan_in..(k + 1) * fan_in]
                        .iter()
                        .zip(&h)
                        .fold(b, |a, (&w, &x)| a + w * x)
                        .max(T::zero())
                })
                .collect();
        }
        h
    }

    /// Least-squares fit of `targets` on the activations entering the last
    /// hidden layer, placed in that layer's first unit with a bias large
    /// enough to keep it active on every input; the output layer reads that
    /// unit back and removes the offset. Other last-layer units start with
    /// zero output weight. Returns `false` (weights untouched) if the
    /// normal equations cannot be solved.
    pub fn fit_spline(&mut self, inputs: &[T], targets: &[T]) -> bool {
        let last_hidden = self.layers.len() - 2;
        let rows: Vec<Vec<T>> = inputs
            .iter()
            .map(|&t| {
                let mut h = self.features(last_hidden, t);
                h.push(T::one());
                h
            })
            .collect();
        let n = match rows.first() {
            Some(r) => r.len(),
            None => return false,
        };
        let mut normal = vec![T::zero(); n * n];
        let mut coef = vec![T::zero(); n];
        for (h, &y) in rows.iter().zip(targets) {
            for i in 0..n {
                coef[i] += h[i] * y;
                for j in 0..n {
                    normal[i * n + j] += h[i] * h[j];
                }
            }
        }
        // tiny ridge keeps collinear or empty hinges solvable
        let scale = (0..n).fold(T::zero(), |a, i| a.max(normal[i * n + i]));
        for i in 0..n {
            normal[i * n + i] += scale * T::lit(1e-10) + T::min_positive_value();
        }
        if !crate::lm::cholesky_solve(&mut normal, n, &mut coef) || coef.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let fit = |h: &[T]| h.iter().zip(&coef).fold(T::zero(), |a, (&x, &c)| a + x * c);
        let lowest = rows.iter().map(|h| fit(h)).fold(T::infinity(), T::min);
        let lift = (-lowest).max(T::zero()) + T::one();

        let unit = &mut self.layers[last_hidden];
        unit.weights[..n - 1].copy_from_slice(&coef[..n - 1]);
        unit.biases[0] = coef[n - 1] + lift;
        let out = &mut self.layers[last_hidden + 1];
        out.weights.iter_mut().for_each(|v| *v = T::zero());
        out.weights[0] = T::one();
        out.biases[0] = -lift;
        true
    }

    pub fn check(&self, spec: &MlpSpec) -> Result<()> {
        let shapes = spec.layer_shapes();
        if shapes.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "spec has {} layers, weights have {}",
                shapes.len(),
                self.layers.len()
            )));
        }
        for (k, ((i, o), layer)) in shapes.iter().zip(&self.layers).enumerate() {
            if layer.weights.len() != i * o || layer.biases.len() != *o {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k}: expected {o}x{i} weights and {o} biases, got {} and {}",
                    layer.weights.len(),
                    layer.biases.len()
                )));
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!("layer {k}: non-finite entry")));
            }
        }
        Ok(())
    }

    /// Parameters in layer order, each layer's weights before its biases.
    pub fn flatten(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn from_flat(spec: &MlpSpec, flat: &[T]) -> Result<Self> {
        if flat.len() != spec.n_params() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                spec.n_params(),
                flat.len()
            )));
        }
        let mut rest = flat;
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| {
                let (w, tail) = rest.split_at(i * o);
                let (b, tail) = tail.split_at(o);
                rest = tail;
                Layer {
                    weights: w.to_vec(),
                    biases: b.to_vec(),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn set_flat(&mut self, flat: &[T]) {
        let mut k = 0;
        for layer in &mut self.layers {
            for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *v = flat[k];
                k += 1;
            }
        }
    }
}
