//! Mixed training: a regression phase on GUI-derived cardinal data, then
//! pairwise fine-tuning under the Bradley-Terry link.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_gradient, AdamState};
use super::losses::{bradley_terry_prob, LossKind};
use super::TrainError;
use crate::domain::Bundle;
use crate::mvnn::{backward, forward_cached, ForwardCache, MvnnArchitecture, MvnnParams};

/// Cardinal training pairs inferred from the GUI report.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RegressionDataset {
    samples: Vec<(Bundle, f64)>,
}

impl RegressionDataset {
    pub fn new(samples: Vec<(Bundle, f64)>) -> Result<Self, TrainError> {
        if let Some((b, v)) = samples.iter().find(|(_, v)| !v.is_finite() || *v < 0.0) {
            return Err(TrainError::InvalidConfig(format!(
                "regression target for {b:?} must be finite and non-negative, got {v}"
            )));
        }
        Ok(RegressionDataset { samples })
    }

    pub fn samples(&self) -> &[(Bundle, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One answered comparison query: `first_preferred` is true when the first
/// bundle won.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ComparisonSample {
    pub first: Bundle,
    pub second: Bundle,
    pub first_preferred: bool,
}

/// Ordinal training triples from answered comparison queries.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ComparisonDataset {
    samples: Vec<ComparisonSample>,
}

impl ComparisonDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sample: ComparisonSample) -> Result<(), TrainError> {
        if sample.first == sample.second {
            return Err(TrainError::InvalidConfig(format!(
                "comparison pairs must be distinct, got {:?} twice",
                sample.first
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[ComparisonSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Every knob of the mixed-training algorithm. The comparison-phase
/// defaults are the winning configuration from hyperparameter search; the
/// regression phase is calibrated so GUI pre-training converges in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub regression_epochs: usize,
    pub regression_lr: f64,
    pub regression_l2: f64,
    pub comparison_epochs: usize,
    pub comparison_lr: f64,
    pub comparison_l2: f64,
    pub comparison_batch_size: usize,
    pub grad_clip_norm: f64,
    pub loss: LossKind,
    /// The value model is `value_scale * net(x)`: the network trains on
    /// unit-mean targets while the Bradley-Terry link sees differences in
    /// the student's value units, where the sigmoid saturates on clear-cut
    /// pairs and fine-tuning only moves near-tie decisions.
    pub value_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regression_epochs: 300,
            regression_lr: 0.01,
            regression_l2: 1e-6,
            comparison_epochs: 10,
            comparison_lr: 0.01,
            comparison_l2: 0.01,
            comparison_batch_size: 1,
            grad_clip_norm: 0.2,
            loss: LossKind::Gce { q: 0.3 },
            value_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.regression_lr <= 0.0 || self.comparison_lr <= 0.0 {
            return Err(TrainError::InvalidConfig(
                "learning rates must be positive".into(),
            ));
        }
        if self.regression_l2 < 0.0 || self.comparison_l2 < 0.0 {
            return Err(TrainError::InvalidConfig(
                "L2 coefficients must be non-negative".into(),
            ));
        }
        if self.comparison_batch_size == 0 {
            return Err(TrainError::InvalidConfig(
                "comparison batch size must be positive".into(),
            ));
        }
        if self.grad_clip_norm <= 0.0 {
            return Err(TrainError::InvalidConfig(
                "gradient clip norm must be positive".into(),
            ));
        }
        if !(self.value_scale > 0.0) {
            return Err(TrainError::InvalidConfig(
                "value scale must be positive".into(),
            ));
        }
        self.loss.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainPhase {
    Regression,
    Comparison,
}

/// One line of the training-curve log.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainRecord {
    pub phase: TrainPhase,
    pub epoch: usize,
    pub loss: f64,
    pub pairwise_accuracy: Option<f64>,
}

/// Regression phase: full-batch mean squared error plus L2, one Adam step
/// per epoch, projection back to the sign-feasible set after every step.
pub fn train_regression(
    arch: &MvnnArchitecture,
    params: &mut MvnnParams,
    data: &RegressionDataset,
    cfg: &TrainConfig,
    adam: &mut AdamState,
) -> Result<Vec<TrainRecord>, TrainError> {
    cfg.validate()?;
    let mut history = Vec::with_capacity(cfg.regression_epochs);
    if data.is_empty() {
        return Ok(history);
    }
    let n = data.len() as f64;
    let mut cache = ForwardCache::new(arch);
    let mut grads = MvnnParams::zeros(arch);
    for epoch in 0..cfg.regression_epochs {
        grads.fill(0.0);
        let mut data_loss = 0.0;
        for &(bundle, target) in data.samples() {
            let predicted = forward_cached(arch, params, bundle, &mut cache);
            let residual = predicted - target;
            data_loss += residual * residual;
            backward(arch, params, &mut cache, 2.0 * residual / n, &mut grads);
        }
        let loss = data_loss / n + cfg.regression_l2 * params.l2_norm_squared();
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                phase: TrainPhase::Regression,
                epoch,
                loss,
            });
        }
        add_l2_gradient(&mut grads, params, cfg.regression_l2);
        adam.step(params, &grads, cfg.regression_lr);
        params.project();
        assert!(params.signs_ok(), "sign constraints violated after projection");
        history.push(TrainRecord {
            phase: TrainPhase::Regression,
            epoch,
            loss,
            pairwise_accuracy: None,
        });
    }
    Ok(history)
}

/// Comparison phase: minibatch Bradley-Terry fine-tuning with the
/// configured loss, L2 in the objective, global gradient clipping, Adam,
/// and projection after every step.
pub fn train_comparisons<R: Rng + ?Sized>(
    arch: &MvnnArchitecture,
    params: &mut MvnnParams,
    data: &ComparisonDataset,
    cfg: &TrainConfig,
    adam: &mut AdamState,
    rng: &mut R,
) -> Result<Vec<TrainRecord>, TrainError> {
    cfg.validate()?;
    let mut history = Vec::with_capacity(cfg.comparison_epochs);
    if data.is_empty() {
        return Ok(history);
    }
    let mut cache_first = ForwardCache::new(arch);
    let mut cache_second = ForwardCache::new(arch);
    let mut grads = MvnnParams::zeros(arch);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.comparison_epochs {
        shuffle(&mut order, rng);
        let mut data_loss = 0.0;
        for batch in order.chunks(cfg.comparison_batch_size) {
            grads.fill(0.0);
            let batch_n = batch.len() as f64;
            for &idx in batch {
                let sample = &data.samples()[idx];
                let v1 = cfg.value_scale * forward_cached(arch, params, sample.first, &mut cache_first);
                let v2 = cfg.value_scale * forward_cached(arch, params, sample.second, &mut cache_second);
                let p_hat = bradley_terry_prob(v1, v2);
                let (p_correct, sign) = if sample.first_preferred {
                    (p_hat, 1.0)
                } else {
                    (1.0 - p_hat, -1.0)
                };
                let loss = cfg.loss.loss(p_correct);
                data_loss += loss;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        phase: TrainPhase::Comparison,
                        epoch,
                        loss,
                    });
                }
                // dL/dnet1 = dL/dp_correct * (+-1) * sigma'(v1 - v2) * scale;
                // net2 gets the negation.
                let upstream =
                    cfg.loss.dloss_dp(p_correct) * sign * p_hat * (1.0 - p_hat) * cfg.value_scale;
                backward(arch, params, &mut cache_first, upstream / batch_n, &mut grads);
                backward(arch, params, &mut cache_second, -upstream / batch_n, &mut grads);
            }
            add_l2_gradient(&mut grads, params, cfg.comparison_l2);
            clip_gradient(&mut grads, cfg.grad_clip_norm);
            adam.step(params, &grads, cfg.comparison_lr);
            params.project();
        }
        assert!(params.signs_ok(), "sign constraints violated after projection");
        let accuracy = pairwise_accuracy(arch, params, data, &mut cache_first);
        let loss = data_loss / data.len() as f64 + cfg.comparison_l2 * params.l2_norm_squared();
        history.push(TrainRecord {
            phase: TrainPhase::Comparison,
            epoch,
            loss,
            pairwise_accuracy: Some(accuracy),
        });
    }
    Ok(history)
}

/// Fraction of comparisons the model currently orders the same way as the
/// recorded labels (ties count as half).
pub fn pairwise_accuracy(
    arch: &MvnnArchitecture,
    params: &MvnnParams,
    data: &ComparisonDataset,
    cache: &mut ForwardCache,
) -> f64 {
    if data.is_empty() {
        return 1.0;
    }
    let mut score = 0.0;
    for sample in data.samples() {
        let v1 = forward_cached(arch, params, sample.first, cache);
        let v2 = forward_cached(arch, params, sample.second, cache);
        let model_first = v1 - v2;
        if model_first == 0.0 {
            score += 0.5;
        } else if (model_first > 0.0) == sample.first_preferred {
            score += 1.0;
        }
    }
    score / data.len() as f64
}

fn add_l2_gradient(grads: &mut MvnnParams, params: &MvnnParams, l2: f64) {
    if l2 == 0.0 {
        return;
    }
    for (g, theta) in grads.values_mut().zip(params.values()) {
        *g += 2.0 * l2 * theta;
    }
}

fn shuffle<R: Rng + ?Sized, T>(slice: &mut [T], rng: &mut R) {
    for i in (1..slice.len()).rev() {
        let j = rng.random_range(0..=i);
        slice.swap(i, j);
    }
}
