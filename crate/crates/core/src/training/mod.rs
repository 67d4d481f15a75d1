//! Training of value models: Adam-driven regression on GUI-derived data,
//! then pairwise fine-tuning with a noise-robust loss.

mod adam;
mod losses;
mod trainer;

pub use adam::{clip_gradient, AdamState, BETA1, BETA2, EPSILON};
pub use losses::{
    bce_loss, bce_loss_dp, bradley_terry_prob, gce_loss, gce_loss_dp, sigmoid, LossKind, PROB_EPS,
};
pub use trainer::{
    pairwise_accuracy, train_comparisons, train_regression, ComparisonDataset, ComparisonSample,
    RegressionDataset, TrainConfig, TrainPhase, TrainRecord,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} in {phase:?} phase at epoch {epoch}")]
    NonFiniteLoss {
        phase: TrainPhase,
        epoch: usize,
        loss: f64,
    },
}
