//! The Bradley-Terry link and the classification losses applied to it.

use serde::{Deserialize, Serialize};

/// Probabilities are clamped away from zero before log/pow.
pub const PROB_EPS: f64 = 1e-12;

/// Probability that the first option beats the second under the
/// Bradley-Terry model: the logistic function of the value difference.
///
/// Always lands strictly inside (0, 1), and prob(a,b) + prob(b,a) == 1
/// exactly: the winning side is computed once as sigmoid of the positive
/// difference and the losing side as its exact complement.
pub fn bradley_terry_prob(v1: f64, v2: f64) -> f64 {
    // Largest f64 below 1; its complement 2^-53 is exact.
    const MAX_P: f64 = 1.0 - f64::EPSILON / 2.0;
    if v1 >= v2 {
        sigmoid(v1 - v2).min(MAX_P)
    } else {
        1.0 - sigmoid(v2 - v1).min(MAX_P)
    }
}

/// Numerically stable logistic.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn clamp_prob(p: f64) -> f64 {
    if p < PROB_EPS {
        log::debug!("probability {p} clamped to {PROB_EPS}");
        PROB_EPS
    } else {
        p
    }
}

/// Generalized cross-entropy: (1 - p^q) / q for q in (0, 1]. Interpolates
/// cross-entropy (q -> 0) and mean absolute error (q = 1); symmetric at
/// q = 1, which is what makes it robust to uniform label noise.
pub fn gce_loss(p: f64, q: f64) -> f64 {
    debug_assert!(q > 0.0 && q <= 1.0, "q must lie in (0, 1], got {q}");
    let p = clamp_prob(p);
    (1.0 - p.powf(q)) / q
}

/// d(gce_loss)/dp = -p^(q-1).
pub fn gce_loss_dp(p: f64, q: f64) -> f64 {
    let p = clamp_prob(p);
    -p.powf(q - 1.0)
}

/// Binary cross-entropy of the probability assigned to the observed label.
pub fn bce_loss(p: f64) -> f64 {
    -clamp_prob(p).ln()
}

/// d(bce_loss)/dp = -1/p.
pub fn bce_loss_dp(p: f64) -> f64 {
    -1.0 / clamp_prob(p)
}

/// Which loss scores the probability assigned to the observed label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Gce { q: f64 },
    Bce,
}

impl LossKind {
    pub fn loss(&self, p_correct: f64) -> f64 {
        match *self {
            LossKind::Gce { q } => gce_loss(p_correct, q),
            LossKind::Bce => bce_loss(p_correct),
        }
    }

    pub fn dloss_dp(&self, p_correct: f64) -> f64 {
        match *self {
            LossKind::Gce { q } => gce_loss_dp(p_correct, q),
            LossKind::Bce => bce_loss_dp(p_correct),
        }
    }

    pub fn validate(&self) -> Result<(), super::TrainError> {
        if let LossKind::Gce { q } = *self {
            if !(q > 0.0 && q <= 1.0) {
                return Err(super::TrainError::InvalidConfig(format!(
                    "GCE q must lie in (0, 1], got {q}"
                )));
            }
        }
        Ok(())
    }
}
