use super::{MlpSpec, MlpWeights};
use crate::error::Result;
use crate::scalar::Scalar;

#[inline]
fn relu<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z
    } else {
        T::zero()
    }
}

#[inline]
fn relu_prime<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Network output at input `t`.
pub fn forward<T: Scalar>(spec: &MlpSpec, weights: &MlpWeights<T>, t: T) -> Result<T> {
    weights.check(spec)?;
    Ok(forward_unchecked(weights, t))
}

pub(crate) fn forward_unchecked<T: Scalar>(weights: &MlpWeights<T>, t: T) -> T {
    let last = weights.layers.len() - 1;
    let mut h = vec![t];
    for (k, layer) in weights.layers.iter().enumerate() {
        let n_in = h.len();
        h = layer
            .weights
            .chunks_exact(n_in)
            .zip(&layer.biases)
            .map(|(row, &b)| {
                let z = row.iter().zip(&h).fold(b, |acc, (&w, &x)| acc + w * x);
                if k == last {
                    z
                } else {
                    relu(z)
                }
            })
            .collect();
    }
    h[0]
}

/// `d output / d t`, carried forward alongside the activations.
pub fn time_derivative<T: Scalar>(spec: &MlpSpec, weights: &MlpWeights<T>, t: T) -> Result<T> {
    weights.check(spec)?;
    Ok(value_and_slope(weights, t).1)
}

/// Output and its time derivative in one pass.
pub(crate) fn value_and_slope<T: Scalar>(weights: &MlpWeights<T>, t: T) -> (T, T) {
    let last = weights.layers.len() - 1;
    let mut h = vec![t];
    let mut dh = vec![T::one()];
    for (k, layer) in weights.layers.iter().enumerate() {
        let n_in = h.len();
        let mut next = Vec::with_capacity(layer.biases.len());
        let mut dnext = Vec::with_capacity(layer.biases.len());
        for (row, &b) in layer.weights.chunks_exact(n_in).zip(&layer.biases) {
            let mut z = b;
            let mut dz = T::zero();
            for ((&w, &x), &dx) in row.iter().zip(&h).zip(&dh) {
                z += w * x;
                dz += w * dx;
            }
            if k == last {
                next.push(z);
                dnext.push(dz);
            } else {
                let gate = relu_prime(z);
                next.push(relu(z));
                dnext.push(gate * dz);
            }
        }
        h = next;
        dh = dnext;
    }
    (h[0], dh[0])
}

/// Smallest |pre-activation| over all hidden units at input `t`; derivatives
/// are only meaningful away from zero.
pub fn min_abs_pre_activation<T: Scalar>(weights: &MlpWeights<T>, t: T) -> T {
    let last = weights.layers.len() - 1;
    let mut h = vec![t];
    let mut closest = T::infinity();
    for layer in &weights.layers[..last] {
        let n_in = h.len();
        h = layer
            .weights
            .chunks_exact(n_in)
            .zip(&layer.biases)
            .map(|(row, &b)| {
                let z = row.iter().zip(&h).fold(b, |acc, (&w, &x)| acc + w * x);
                closest = closest.min(z.abs());
                relu(z)
            })
            .collect();
    }
    closest
}

/// Row-major `times.len() x n_params` matrix of output derivatives with
/// respect to every weight and bias, in [`MlpWeights::flatten`] order.
pub fn jacobian<T: Scalar>(spec: &MlpSpec, weights: &MlpWeights<T>, times: &[T]) -> Result<Vec<T>> {
    weights.check(spec)?;
    Ok(jacobian_unchecked(spec, weights, times))
}

pub(crate) fn jacobian_unchecked<T: Scalar>(spec: &MlpSpec, weights: &MlpWeights<T>, times: &[T]) -> Vec<T> {
    let n_params = spec.n_params();
    let shapes = spec.layer_shapes();
    let mut offsets = Vec::with_capacity(shapes.len());
    let mut acc = 0;
    for (i, o) in &shapes {
        offsets.push(acc);
        acc += i * o + o;
    }
    let last = weights.layers.len() - 1;

    let mut out = vec![T::zero(); times.len() * n_params];
    let mut acts: Vec<Vec<T>> = Vec::with_capacity(shapes.len() + 1);
    let mut pres: Vec<Vec<T>> = Vec::with_capacity(shapes.len());
    for (row_out, &t) in out.chunks_exact_mut(n_params).zip(times) {
        acts.clear();
        pres.clear();
        acts.push(vec![t]);
        for (k, layer) in weights.layers.iter().enumerate() {
            let h = &acts[k];
            let z: Vec<T> = layer
                .weights
                .chunks_exact(h.len())
                .zip(&layer.biases)
                .map(|(row, &b)| row.iter().zip(h).fold(b, |acc, (&w, &x)| acc + w * x))
                .collect();
            let a = if k == last { z.clone() } else { z.iter().map(|&v| relu(v)).collect() };
            pres.push(z);
            acts.push(a);
        }

        // backward: sensitivity of the output to each pre-activation
        let mut sens = vec![T::one()];
        for k in (0..=last).rev() {
            let (n_in, n_out) = shapes[k];
            let input = &acts[k];
            let base = offsets[k];
            for o in 0..n_out {
                let s = sens[o];
                for i in 0..n_in {
                    row_out[base + o * n_in + i] = s * input[i];
                }
                row_out[base + n_in * n_out + o] = s;
            }
            if k > 0 {
                let layer = &weights.layers[k];
                let prev_pre = &pres[k - 1];
                let mut back = vec![T::zero(); n_in];
                for o in 0..n_out {
                    let s = sens[o];
                    if s == T::zero() {
                        continue;
                    }
                    for i in 0..n_in {
                        back[i] += layer.weights[o * n_in + i] * s;
                    }
                }
                for (b, &z) in back.iter_mut().zip(prev_pre) {
                    *b *= relu_prime(z);
                }
                sens = back;
            }
        }
    }
    out
}
