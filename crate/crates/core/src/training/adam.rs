//! Adam with the usual defaults, plus global gradient-norm clipping.

use itertools::izip;

use crate::mvnn::{MvnnArchitecture, MvnnParams};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment accumulators shaped like the parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: MvnnParams,
    v: MvnnParams,
    step: u64,
}

impl AdamState {
    pub fn new(arch: &MvnnArchitecture) -> Self {
        AdamState {
            m: MvnnParams::zeros(arch),
            v: MvnnParams::zeros(arch),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update of `params` from `grads`.
    pub fn step(&mut self, params: &mut MvnnParams, grads: &MvnnParams, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        for (theta, g, m, v) in izip!(
            params.values_mut(),
            grads.values(),
            self.m.values_mut(),
            self.v.values_mut()
        ) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *theta -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}

/// Scales the gradient so its global L2 norm is at most `max_norm`,
/// preserving direction. Returns the pre-clip norm.
pub fn clip_gradient(grads: &mut MvnnParams, max_norm: f64) -> f64 {
    let norm = grads.l2_norm_squared().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.values_mut() {
            *g *= scale;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> MvnnArchitecture {
        MvnnArchitecture::new(3, vec![2], vec![1.0], vec![1.0; 3]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let arch = arch();
        let mut params = MvnnParams::zeros(&arch);
        for (i, v) in params.values_mut().enumerate() {
            *v = 0.1 * (i as f64 + 1.0);
        }
        let snapshot = params.clone();
        let grads = MvnnParams::zeros(&arch);
        let mut adam = AdamState::new(&arch);
        adam.step(&mut params, &grads, 0.01);
        for (a, b) in params.values().zip(snapshot.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_moves_against_gradient() {
        let arch = arch();
        let mut params = MvnnParams::zeros(&arch);
        let mut grads = MvnnParams::zeros(&arch);
        for g in grads.values_mut() {
            *g = 1.0;
        }
        let mut adam = AdamState::new(&arch);
        adam.step(&mut params, &grads, 0.05);
        for v in params.values() {
            assert!(v < 0.0);
        }
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn clip_examples() {
        let arch = arch();
        // Norm below the cap: unchanged.
        let mut g = MvnnParams::zeros(&arch);
        *g.values_mut().next().unwrap() = 0.1;
        let before = g.clone();
        let norm = clip_gradient(&mut g, 0.2);
        assert!((norm - 0.1).abs() < 1e-15);
        assert_eq!(g, before);

        // Norm 2.0 clipped to 0.2: scaled by 0.1, direction preserved.
        let mut g = MvnnParams::zeros(&arch);
        *g.values_mut().next().unwrap() = 2.0;
        let norm = clip_gradient(&mut g, 0.2);
        assert!((norm - 2.0).abs() < 1e-15);
        assert!((g.values().next().unwrap() - 0.2).abs() < 1e-15);
        assert!((g.l2_norm_squared().sqrt() - 0.2).abs() < 1e-12);

        // Zero gradient stays zero.
        let mut g = MvnnParams::zeros(&arch);
        clip_gradient(&mut g, 0.2);
        assert!(g.values().all(|v| v == 0.0));
    }
}
