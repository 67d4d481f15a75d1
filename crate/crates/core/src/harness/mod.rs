//! End-to-end experiment orchestration: configuration, per-student runs,
//! ablation suites, hyperparameter search, metrics, and result files.

pub mod config;
pub mod hpo;
pub mod metrics;
pub mod report;
pub mod stats;
pub mod student;
pub mod suite;

pub use config::{ExperimentConfig, ProxyMode, ProxySettings};
pub use student::{
    generate_instances, prepare_baseline, run_cq_phase, run_cq_phase_with_model, run_student,
    run_student_with_model, ProxyRunner, StudentBaseline, StudentInstance, StudentResult,
};
pub use suite::{run_suite, CellResult, Suite, SuiteResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Train(#[from] crate::training::TrainError),
    #[error(transparent)]
    Acquisition(#[from] crate::acquisition::AcquisitionError),
    #[error(transparent)]
    Proxy(#[from] crate::proxy::ProxyError),
    #[error(transparent)]
    Backend(#[from] crate::proxy::BackendError),
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
