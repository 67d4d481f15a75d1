//! The experiment configuration: every knob of the pipeline, loadable from
//! a TOML file with CLI overrides on top.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::acquisition::QuerySelector;
use crate::domain::{CourseCatalog, InstanceParams, MistakeProfile};
use crate::mvnn::MvnnArchitecture;
use crate::proxy::Brevity;
use crate::training::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyMode {
    Simulated,
    Llm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    /// Deterministic offline responder; exercises the full prompt/parse
    /// path without a network.
    Scripted,
    /// Replays recorded fixtures from `replay_path`.
    Replay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NarrativeSource {
    RuleBased,
    Llm,
}

/// Everything about the proxy answering comparison queries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxySettings {
    pub mode: ProxyMode,
    /// Probability of a correct answer in simulated mode.
    pub accuracy: f64,
    pub cot_enabled: bool,
    pub backend: BackendKind,
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key; empty means none.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_retries: usize,
    pub replay_path: Option<PathBuf>,
    /// When set, every live exchange is recorded here as replay fixtures.
    pub record_path: Option<PathBuf>,
    pub narrative: NarrativeSource,
    pub brevity: Brevity,
}

impl Default for ProxySettings {
    fn default() -> Self {
        ProxySettings {
            mode: ProxyMode::Simulated,
            accuracy: 0.72,
            cot_enabled: true,
            backend: BackendKind::Http,
            endpoint: "http://localhost:8000/v1/chat/completions".to_string(),
            model: "llama-3.1-8b-instruct".to_string(),
            api_key_env: "PREFELICIT_API_KEY".to_string(),
            temperature: 0.0,
            max_retries: 3,
            replay_path: None,
            record_path: None,
            narrative: NarrativeSource::RuleBased,
            brevity: Brevity::Baseline,
        }
    }
}

/// Network shape, translated to an architecture per catalog size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub hidden_widths: Vec<usize>,
    pub cutoffs: Vec<f64>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            hidden_widths: vec![20, 20],
            cutoffs: vec![1.0, 1.0],
        }
    }
}

impl ArchConfig {
    pub fn build(&self, catalog: &CourseCatalog) -> Result<MvnnArchitecture, ConfigError> {
        MvnnArchitecture::new(
            catalog.num_courses,
            self.hidden_widths.clone(),
            self.cutoffs.clone(),
            vec![1.0; catalog.num_courses],
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Evaluation settings: the held-out bundle set for learning metrics and
/// the CQ counts at which allocation is re-evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub eval_set_size: usize,
    pub quantiles: Vec<f64>,
    /// CQ counts to evaluate at; None derives a 6-point grid over
    /// [0, num_cqs].
    pub grid: Option<Vec<usize>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            eval_set_size: 2000,
            quantiles: vec![1.0, 0.10, 0.05],
            grid: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub num_students: usize,
    pub master_seed: u64,
    pub catalog: CourseCatalog,
    pub instance: InstanceParams,
    pub mistakes: MistakeProfile,
    pub arch: ArchConfig,
    pub ensemble_size: usize,
    /// Bundles sampled uniformly and labeled from the GUI report.
    pub regression_set_size: usize,
    pub num_cqs: usize,
    /// Fine-tune after every this many newly answered queries.
    pub finetune_interval: usize,
    /// Bradley-Terry temperature in value units per logit: query-pair
    /// differences are divided by this before the sigmoid.
    pub bt_temperature: f64,
    pub train: TrainConfig,
    pub acquisition: QuerySelector,
    pub proxy: ProxySettings,
    pub eval: EvalConfig,
    /// Write per-epoch training-curve logs.
    pub log_training: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            num_students: 100,
            master_seed: 42,
            catalog: CourseCatalog::default(),
            instance: InstanceParams::default(),
            mistakes: MistakeProfile::default(),
            arch: ArchConfig::default(),
            ensemble_size: 10,
            regression_set_size: 500,
            num_cqs: 500,
            finetune_interval: 10,
            bt_temperature: 25.0,
            train: TrainConfig {
                regression_epochs: 2000,
                regression_lr: 0.02,
                ..TrainConfig::default()
            },
            acquisition: QuerySelector::default(),
            proxy: ProxySettings::default(),
            eval: EvalConfig::default(),
            log_training: false,
        }
    }
}

/// Parses a configuration from TOML text.
pub fn parse_toml(text: &str) -> Result<ExperimentConfig, ConfigError> {
    Ok(toml::from_str::<ExperimentConfig>(text)?)
}

impl ExperimentConfig {
    pub fn from_toml_path<P: AsRef<Path>>(path: P) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The CQ counts at which allocation is evaluated, always including 0
    /// and num_cqs.
    pub fn eval_grid(&self) -> Vec<usize> {
        let mut grid = match &self.eval.grid {
            Some(g) => g.clone(),
            None => {
                let step = (self.num_cqs / 5).max(1);
                (0..=self.num_cqs).step_by(step).collect()
            }
        };
        grid.push(0);
        grid.push(self.num_cqs);
        grid.sort_unstable();
        grid.dedup();
        grid.retain(|&g| g <= self.num_cqs);
        grid
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_students == 0 {
            return Err(ConfigError::Invalid("num_students must be positive".into()));
        }
        if self.ensemble_size < 2 {
            return Err(ConfigError::Invalid(
                "ensemble_size must be at least 2".into(),
            ));
        }
        if self.finetune_interval == 0 {
            return Err(ConfigError::Invalid(
                "finetune_interval must be positive".into(),
            ));
        }
        if !(self.bt_temperature > 0.0) {
            return Err(ConfigError::Invalid(
                "bt_temperature must be positive".into(),
            ));
        }
        if self.regression_set_size == 0 {
            return Err(ConfigError::Invalid(
                "regression_set_size must be positive".into(),
            ));
        }
        if let Some(grid) = &self.eval.grid {
            if grid.iter().any(|&g| g > self.num_cqs) {
                return Err(ConfigError::Invalid(format!(
                    "eval grid entries must lie in [0, {}]",
                    self.num_cqs
                )));
            }
        }
        if self.eval.quantiles.iter().any(|&q| !(q > 0.0 && q <= 1.0)) {
            return Err(ConfigError::Invalid(
                "quantiles must lie in (0, 1]".into(),
            ));
        }
        if !(self.proxy.accuracy >= 0.0 && self.proxy.accuracy <= 1.0) {
            return Err(ConfigError::Invalid(
                "proxy accuracy must lie in [0, 1]".into(),
            ));
        }
        if self.proxy.max_retries == 0 {
            return Err(ConfigError::Invalid(
                "proxy max_retries must be at least 1".into(),
            ));
        }
        if self.proxy.mode == ProxyMode::Llm
            && self.proxy.backend == BackendKind::Replay
            && self.proxy.replay_path.is_none()
        {
            return Err(ConfigError::Invalid(
                "replay backend needs proxy.replay_path".into(),
            ));
        }
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.arch.build(&self.catalog)?;
        Ok(())
    }

    /// The fields that determine a student's post-regression baseline. Two
    /// configs with equal keys share GUI reports and regression-trained
    /// ensembles, letting ablation suites pair cells on common baselines.
    pub fn baseline_key(&self) -> String {
        let key = (
            &self.catalog,
            &self.instance,
            &self.mistakes,
            &self.arch,
            self.ensemble_size,
            self.regression_set_size,
            self.train.regression_epochs,
            self.train.regression_lr.to_bits(),
            self.train.regression_l2.to_bits(),
            self.eval.eval_set_size,
            self.master_seed,
        );
        serde_json::to_string(&key).expect("key serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_roundtrips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let toml_text = cfg.to_toml();
        let back: ExperimentConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn eval_grid_always_covers_endpoints() {
        let cfg = ExperimentConfig::default();
        let grid = cfg.eval_grid();
        assert_eq!(grid.first(), Some(&0));
        assert_eq!(grid.last(), Some(&500));

        let cfg = ExperimentConfig {
            eval: EvalConfig {
                grid: Some(vec![50]),
                ..EvalConfig::default()
            },
            ..ExperimentConfig::default()
        };
        assert_eq!(cfg.eval_grid(), vec![0, 50, 500]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.ensemble_size = 1;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.eval.grid = Some(vec![9999]);
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.proxy.accuracy = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn baseline_key_ignores_cq_phase_knobs() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.proxy.accuracy = 0.55;
        b.num_cqs = 300;
        b.train.comparison_lr = 0.05;
        b.acquisition.kind = crate::acquisition::AcquisitionKind::Random;
        assert_eq!(a.baseline_key(), b.baseline_key());

        let mut c = a.clone();
        c.mistakes.gamma = 0.5;
        assert_ne!(a.baseline_key(), c.baseline_key());
    }

    #[test]
    fn config_file_loads_with_partial_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "num_students = 7\n[proxy]\naccuracy = 0.65\n").unwrap();
        let cfg = ExperimentConfig::from_toml_path(&path).unwrap();
        assert_eq!(cfg.num_students, 7);
        assert_eq!(cfg.proxy.accuracy, 0.65);
        assert_eq!(cfg.num_cqs, 500);
    }
}
