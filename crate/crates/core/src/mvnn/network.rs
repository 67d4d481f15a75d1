//! Forward and analytic backward passes plus parameter initialization.

use rand::Rng;

use super::{MvnnArchitecture, MvnnParams};
use crate::domain::Bundle;

/// bReLU: clamp to [0, t].
#[inline]
fn brelu(z: f64, t: f64) -> f64 {
    z.clamp(0.0, t)
}

/// Subgradient of bReLU: 1 strictly inside (0, t), 0 outside and at both
/// kinks. The kink choice matters only on a measure-zero set and is pinned
/// here so finite-difference checks know what to exclude.
#[inline]
fn brelu_grad(z: f64, t: f64) -> f64 {
    if z > 0.0 && z < t {
        1.0
    } else {
        0.0
    }
}

/// Reusable buffers holding everything the backward pass needs.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Active input coordinates after capacity normalization: (index, 1/c).
    active: Vec<(usize, f64)>,
    /// Pre-activations of each hidden layer.
    preacts: Vec<Vec<f64>>,
    /// Activations of each hidden layer.
    acts: Vec<Vec<f64>>,
    /// Backward scratch, one buffer per hidden layer.
    deltas: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn new(arch: &MvnnArchitecture) -> Self {
        let preacts: Vec<Vec<f64>> = arch.hidden_widths.iter().map(|&w| vec![0.0; w]).collect();
        ForwardCache {
            active: Vec::with_capacity(arch.input_dim),
            acts: preacts.clone(),
            deltas: preacts.clone(),
            preacts,
        }
    }

    pub fn preactivations(&self) -> &[Vec<f64>] {
        &self.preacts
    }
}

/// Runs the network on a bundle, filling the cache for a later backward
/// pass. Returns the predicted value (non-negative by construction).
pub fn forward_cached(
    arch: &MvnnArchitecture,
    params: &MvnnParams,
    bundle: Bundle,
    cache: &mut ForwardCache,
) -> f64 {
    debug_assert!(params.matches(arch).is_ok());
    cache.active.clear();
    for c in bundle.courses() {
        let idx = c.index();
        cache.active.push((idx, 1.0 / arch.capacity[idx]));
    }

    let num_hidden = arch.hidden_widths.len();
    for layer in 0..num_hidden {
        let w = &params.weights[layer];
        let bias = &params.biases[layer];
        let t = arch.cutoffs[layer];
        if layer == 0 {
            for (i, zi) in cache.preacts[0].iter_mut().enumerate() {
                let row = w.row(i);
                let mut acc = bias[i];
                for &(idx, scale) in &cache.active {
                    acc += row[idx] * scale;
                }
                *zi = acc;
            }
        } else {
            let a_prev = &cache.acts[layer - 1];
            for (i, zi) in cache.preacts[layer].iter_mut().enumerate() {
                let mut acc = bias[i];
                for (wj, aj) in w.row(i).iter().zip(a_prev.iter()) {
                    acc += wj * aj;
                }
                *zi = acc;
            }
        }
        let z = &cache.preacts[layer];
        for (ai, &zi) in cache.acts[layer].iter_mut().zip(z.iter()) {
            *ai = brelu(zi, t);
        }
    }

    let out = params.weights[num_hidden].row(0);
    if num_hidden == 0 {
        let mut acc = 0.0;
        for &(idx, scale) in &cache.active {
            acc += out[idx] * scale;
        }
        acc
    } else {
        out.iter()
            .zip(cache.acts[num_hidden - 1].iter())
            .map(|(w, a)| w * a)
            .sum()
    }
}

/// Convenience forward without cache reuse.
pub fn forward(arch: &MvnnArchitecture, params: &MvnnParams, bundle: Bundle) -> f64 {
    let mut cache = ForwardCache::new(arch);
    forward_cached(arch, params, bundle, &mut cache)
}

/// Accumulates `upstream * d(output)/d(theta)` into `grads`, using the
/// activations recorded by the matching [`forward_cached`] call.
pub fn backward(
    arch: &MvnnArchitecture,
    params: &MvnnParams,
    cache: &mut ForwardCache,
    upstream: f64,
    grads: &mut MvnnParams,
) {
    let num_hidden = arch.hidden_widths.len();

    if num_hidden == 0 {
        let g_out = grads.weights[0].row_mut(0);
        for &(idx, scale) in &cache.active {
            g_out[idx] += upstream * scale;
        }
        return;
    }

    // Output layer: grad of W^K and the delta fed to the last hidden layer.
    let last = num_hidden - 1;
    {
        let a_last = &cache.acts[last];
        let g_out = grads.weights[num_hidden].row_mut(0);
        for (g, a) in g_out.iter_mut().zip(a_last.iter()) {
            *g += upstream * a;
        }
        let w_out = params.weights[num_hidden].row(0);
        let t = arch.cutoffs[last];
        let z = &cache.preacts[last];
        let delta = &mut cache.deltas[last];
        for i in 0..delta.len() {
            delta[i] = upstream * w_out[i] * brelu_grad(z[i], t);
        }
    }

    // Hidden layers, top down.
    for layer in (0..num_hidden).rev() {
        // Weight and bias gradients for this layer.
        {
            let w_grad = &mut grads.weights[layer];
            let b_grad = &mut grads.biases[layer];
            let delta = &cache.deltas[layer];
            if layer == 0 {
                for (i, &d) in delta.iter().enumerate() {
                    let row = w_grad.row_mut(i);
                    for &(idx, scale) in &cache.active {
                        row[idx] += d * scale;
                    }
                    b_grad[i] += d;
                }
            } else {
                let a_prev = &cache.acts[layer - 1];
                for (i, &d) in delta.iter().enumerate() {
                    let row = w_grad.row_mut(i);
                    for (g, a) in row.iter_mut().zip(a_prev.iter()) {
                        *g += d * a;
                    }
                    b_grad[i] += d;
                }
            }
        }

        // Propagate delta to the layer below.
        if layer > 0 {
            let w = &params.weights[layer];
            let t = arch.cutoffs[layer - 1];
            let (below, above) = cache.deltas.split_at_mut(layer);
            let delta = &above[0];
            let delta_prev = &mut below[layer - 1];
            let z_prev = &cache.preacts[layer - 1];
            for (j, dp) in delta_prev.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, &d) in delta.iter().enumerate() {
                    acc += d * w.get(i, j);
                }
                *dp = acc * brelu_grad(z_prev[j], t);
            }
        }
    }
}

/// Seed-deterministic initialization satisfying the sign constraints.
///
/// Weights are uniform on (0, a) with `a` scaled per layer so typical
/// pre-activations land near half the cutoff (the first layer assumes
/// roughly a fifth of the inputs are active, matching small bundles over
/// the full catalog; deeper layers assume about half the bReLU units are).
/// Biases are uniform on (-t/4, 0].
pub fn initialize<R: Rng + ?Sized>(arch: &MvnnArchitecture, rng: &mut R) -> MvnnParams {
    let mut params = MvnnParams::zeros(arch);
    let dims = arch.layer_dims();
    let last_cutoff = arch.cutoffs.last().copied().unwrap_or(1.0);
    for (layer, &(rows, cols)) in dims.iter().enumerate() {
        let t_ref = arch.cutoffs.get(layer).copied().unwrap_or(last_cutoff);
        let effective_fan = if layer == 0 {
            (0.2 * cols as f64).max(1.0)
        } else {
            (0.5 * cols as f64).max(1.0)
        };
        let scale = t_ref / effective_fan;
        let w = &mut params.weights[layer];
        for r in 0..rows {
            for c in 0..cols {
                w.set(r, c, rng.random_range(0.0..scale));
            }
        }
        if layer < arch.cutoffs.len() {
            let t = arch.cutoffs[layer];
            for b in params.biases[layer].iter_mut() {
                *b = -rng.random_range(0.0..t / 4.0);
            }
        }
    }
    debug_assert!(params.signs_ok());
    params
}
