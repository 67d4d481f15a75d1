//! The per-student pipeline: corrupt the profile into a GUI report, train
//! the ensemble on report-derived values, then elicit comparison queries
//! and fine-tune, re-allocating at each evaluation grid point.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::acquisition::QueryHistory;
use crate::domain::{
    best_bundle, bundle_value, corrupt, generate_profile, Bundle, GuiReport, StudentProfile,
};
use crate::mvnn::{EnsembleModel, EnsembleScratch};
use crate::proxy::{
    generate_narrative, llm_answer, simulated_answer, AnswerSource, Brevity, ChatBackend,
    ComparisonRecord, HttpChatBackend, LlmQueryConfig, Narrative, NarrativeBackend,
    RecordingBackend, ReplayBackend, ScriptedChoiceBackend, TranscriptStore,
};
use crate::seeds::{derive_seed, rng_from, stream};
use crate::training::{
    train_comparisons, train_regression, AdamState, ComparisonDataset, ComparisonSample,
    RegressionDataset, TrainRecord,
};

use super::config::{
    BackendKind, ExperimentConfig, NarrativeSource, ProxyMode, ProxySettings,
};
use super::metrics::{centered_mae, quantile_slice, QuantileMetrics};
use super::HarnessError;

pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// Per-student sub-seeds, all derived from the master seed and index.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StudentSeeds {
    pub profile: u64,
    pub corrupt: u64,
    pub regression_data: u64,
    pub init: u64,
    pub train: u64,
    pub acquisition: u64,
    pub proxy: u64,
    pub eval: u64,
}

impl StudentSeeds {
    pub fn for_student(master: u64, index: usize) -> Self {
        let idx = index as u64;
        StudentSeeds {
            profile: derive_seed(master, stream::PROFILE, idx),
            corrupt: derive_seed(master, stream::CORRUPT, idx),
            regression_data: derive_seed(master, stream::REGRESSION_DATA, idx),
            init: derive_seed(master, stream::INIT, idx),
            train: derive_seed(master, stream::TRAIN, idx),
            acquisition: derive_seed(master, stream::ACQUISITION, idx),
            proxy: derive_seed(master, stream::PROXY, idx),
            eval: derive_seed(master, stream::EVAL, idx),
        }
    }
}

/// A generated ground-truth instance: one student.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudentInstance {
    pub index: usize,
    pub seeds: StudentSeeds,
    pub profile: StudentProfile,
    pub mistakes: crate::domain::MistakeProfile,
}

pub fn generate_instances(cfg: &ExperimentConfig) -> Vec<StudentInstance> {
    (0..cfg.num_students)
        .map(|index| {
            let seeds = StudentSeeds::for_student(cfg.master_seed, index);
            let profile =
                generate_profile(&cfg.catalog, &cfg.instance, &mut rng_from(seeds.profile));
            StudentInstance {
                index,
                seeds,
                profile,
                mistakes: cfg.mistakes,
            }
        })
        .collect()
}

/// Everything that precedes comparison queries: the corrupted report, the
/// regression-trained ensemble, the GUI-baseline allocation, and the
/// held-out evaluation set.
#[derive(Clone)]
pub struct StudentBaseline {
    pub report: GuiReport,
    pub ensemble: EnsembleModel,
    /// Mean reported value of the regression set; the value model is
    /// `value_scale * net(x)`.
    pub value_scale: f64,
    pub gui_bundle: Bundle,
    pub gui_true_value: f64,
    pub optimal_true_value: f64,
    pub eval_bundles: Vec<Bundle>,
    pub eval_truth: Vec<f64>,
    pub regression_log: Vec<TrainRecord>,
}

pub fn prepare_baseline(
    cfg: &ExperimentConfig,
    instance: &StudentInstance,
) -> Result<StudentBaseline, HarnessError> {
    let catalog = &cfg.catalog;
    let profile = &instance.profile;
    let report = corrupt(profile, &instance.mistakes, &mut rng_from(instance.seeds.corrupt));

    let true_of = |b: Bundle| bundle_value(profile.base_values(), profile.groups(), b);
    let reported_of = |b: Bundle| bundle_value(report.base_values(), report.groups(), b);

    // Cardinal dataset: uniform bundles labeled with the reported value,
    // targets normalized to unit mean.
    let mut data_rng = rng_from(instance.seeds.regression_data);
    let raw: Vec<(Bundle, f64)> = (0..cfg.regression_set_size)
        .map(|_| {
            let b = catalog.sample_bundle(&mut data_rng);
            (b, reported_of(b))
        })
        .collect();
    let value_scale = (raw.iter().map(|(_, v)| v).sum::<f64>() / raw.len() as f64).max(1e-9);
    let regression_set =
        RegressionDataset::new(raw.into_iter().map(|(b, v)| (b, v / value_scale)).collect())?;

    let arch = cfg.arch.build(catalog)?;
    let mut ensemble = EnsembleModel::initialize(arch, cfg.ensemble_size, instance.seeds.init);
    let mut regression_log = Vec::new();
    for (j, member) in ensemble.members.iter_mut().enumerate() {
        let mut adam = AdamState::new(&ensemble.arch);
        let history =
            train_regression(&ensemble.arch, member, &regression_set, &cfg.train, &mut adam)?;
        if cfg.log_training && j == 0 {
            regression_log = history;
        }
    }

    let (gui_bundle, _) = best_bundle(catalog, reported_of);
    let gui_true_value = true_of(gui_bundle);
    let (_, optimal_true_value) = best_bundle(catalog, true_of);

    let mut eval_rng = rng_from(instance.seeds.eval);
    let eval_bundles: Vec<Bundle> = (0..cfg.eval.eval_set_size)
        .map(|_| catalog.sample_bundle(&mut eval_rng))
        .collect();
    let eval_truth: Vec<f64> = eval_bundles.iter().map(|&b| true_of(b)).collect();

    Ok(StudentBaseline {
        report,
        ensemble,
        value_scale,
        gui_bundle,
        gui_true_value,
        optimal_true_value,
        eval_bundles,
        eval_truth,
        regression_log,
    })
}

/// How comparison queries get answered at run time.
pub enum ProxyRunner {
    Simulated {
        accuracy: f64,
    },
    Llm {
        backend: Arc<dyn ChatBackend>,
        model: String,
        temperature: f64,
        cot_enabled: bool,
        max_retries: usize,
        narrative: NarrativeSource,
        brevity: Brevity,
    },
}

impl ProxyRunner {
    pub fn from_settings(settings: &ProxySettings) -> Result<Self, HarnessError> {
        match settings.mode {
            ProxyMode::Simulated => Ok(ProxyRunner::Simulated {
                accuracy: settings.accuracy,
            }),
            ProxyMode::Llm => {
                let inner: Arc<dyn ChatBackend> = match settings.backend {
                    BackendKind::Http => Arc::new(HttpChatBackend::new(
                        &settings.endpoint,
                        &settings.api_key_env,
                    )?),
                    BackendKind::Scripted => Arc::new(ScriptedChoiceBackend),
                    BackendKind::Replay => {
                        let path = settings.replay_path.as_ref().ok_or_else(|| {
                            HarnessError::Config(super::config::ConfigError::Invalid(
                                "replay backend needs proxy.replay_path".into(),
                            ))
                        })?;
                        Arc::new(ReplayBackend::from_path(path)?)
                    }
                };
                let backend: Arc<dyn ChatBackend> = match &settings.record_path {
                    Some(path) => Arc::new(RecordingBackend::create(ArcBackend(inner), path)?),
                    None => inner,
                };
                Ok(ProxyRunner::Llm {
                    backend,
                    model: settings.model.clone(),
                    temperature: settings.temperature,
                    cot_enabled: settings.cot_enabled,
                    max_retries: settings.max_retries,
                    narrative: settings.narrative,
                    brevity: settings.brevity,
                })
            }
        }
    }
}

/// Adapter so a shared backend can sit inside a recording wrapper.
struct ArcBackend(Arc<dyn ChatBackend>);

impl ChatBackend for ArcBackend {
    fn complete(
        &self,
        request: &crate::proxy::ChatRequest,
    ) -> Result<crate::proxy::ChatResponse, crate::proxy::BackendError> {
        self.0.complete(request)
    }

    fn name(&self) -> &str {
        self.0.name()
    }
}

/// Allocation and learning quality at one evaluation grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridPoint {
    pub cqs: usize,
    pub bundle: Bundle,
    pub true_value: f64,
    /// 100 * true value / GUI-baseline true value.
    pub normalized_value: f64,
    /// Whole-set centered MAE of the current model.
    pub mae_c: f64,
}

/// Everything recorded for one student run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudentResult {
    pub schema_version: u32,
    pub student: usize,
    pub gui_bundle: Bundle,
    pub gui_true_value: f64,
    pub optimal_true_value: f64,
    pub value_scale: f64,
    pub num_cqs: usize,
    pub grid: Vec<GridPoint>,
    pub final_normalized_value: f64,
    /// Accuracy of scored records (fallback answers excluded); None when
    /// nothing was scored.
    pub proxy_accuracy: Option<f64>,
    pub fallback_queries: usize,
    pub metrics_before: Vec<QuantileMetrics>,
    pub metrics_after: Vec<QuantileMetrics>,
    /// Training-curve records (first ensemble member) when logging is on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub training_log: Vec<TrainRecord>,
}

fn model_predictions(
    ensemble: &EnsembleModel,
    scale: f64,
    bundles: &[Bundle],
    scratch: &mut EnsembleScratch,
) -> Vec<f64> {
    bundles
        .iter()
        .map(|&b| scale * ensemble.mean(b, scratch))
        .collect()
}

fn allocate(
    catalog: &crate::domain::CourseCatalog,
    ensemble: &EnsembleModel,
    scratch: &mut EnsembleScratch,
) -> (Bundle, f64) {
    best_bundle(catalog, |b| ensemble.mean(b, scratch))
}

/// Runs the comparison-query loop from a prepared baseline.
pub fn run_cq_phase(
    cfg: &ExperimentConfig,
    instance: &StudentInstance,
    baseline: &StudentBaseline,
    proxy: &ProxyRunner,
    transcripts: &TranscriptStore,
) -> Result<StudentResult, HarnessError> {
    run_cq_phase_with_model(cfg, instance, baseline, proxy, transcripts).map(|(r, _)| r)
}

/// As [`run_cq_phase`], also handing back the fine-tuned ensemble (for
/// checkpointing).
pub fn run_cq_phase_with_model(
    cfg: &ExperimentConfig,
    instance: &StudentInstance,
    baseline: &StudentBaseline,
    proxy: &ProxyRunner,
    transcripts: &TranscriptStore,
) -> Result<(StudentResult, EnsembleModel), HarnessError> {
    let catalog = &cfg.catalog;
    let profile = &instance.profile;
    let true_of = |b: Bundle| bundle_value(profile.base_values(), profile.groups(), b);
    let normalize = |v: f64| 100.0 * v / baseline.gui_true_value.max(1e-9);

    // The Bradley-Terry link sees value differences divided by the
    // configured temperature.
    let mut train_cfg = cfg.train;
    train_cfg.value_scale = baseline.value_scale / cfg.bt_temperature;

    let narrative: Option<Narrative> = match proxy {
        ProxyRunner::Simulated { .. } => None,
        ProxyRunner::Llm {
            backend,
            model,
            temperature,
            narrative,
            brevity,
            ..
        } => {
            let source = match narrative {
                NarrativeSource::RuleBased => NarrativeBackend::RuleBased,
                NarrativeSource::Llm => NarrativeBackend::Chat {
                    backend: backend.as_ref(),
                    model: model.clone(),
                    temperature: *temperature,
                },
            };
            Some(generate_narrative(profile, instance.index, *brevity, &source)?)
        }
    };

    let snapshot = baseline.ensemble.members.clone();
    let mut ensemble = baseline.ensemble.clone();
    let mut scratch = EnsembleScratch::new(&ensemble);
    let grid_points = cfg.eval_grid();

    let metrics_at = |ensemble: &EnsembleModel, scratch: &mut EnsembleScratch| {
        let pred = model_predictions(ensemble, baseline.value_scale, &baseline.eval_bundles, scratch);
        cfg.eval
            .quantiles
            .iter()
            .map(|&q| quantile_slice(&pred, &baseline.eval_truth, q))
            .collect::<Vec<_>>()
    };

    let metrics_before = metrics_at(&ensemble, &mut scratch);
    let mae_c_of = |ensemble: &EnsembleModel, scratch: &mut EnsembleScratch| {
        let pred = model_predictions(ensemble, baseline.value_scale, &baseline.eval_bundles, scratch);
        centered_mae(&pred, &baseline.eval_truth)
    };

    let mut grid = Vec::with_capacity(grid_points.len());
    if grid_points.contains(&0) {
        // Zero queries elicited: the mechanism has only the GUI report, so
        // the allocation is the GUI baseline itself.
        grid.push(GridPoint {
            cqs: 0,
            bundle: baseline.gui_bundle,
            true_value: baseline.gui_true_value,
            normalized_value: 100.0,
            mae_c: mae_c_of(&ensemble, &mut scratch),
        });
    }

    let mut history = QueryHistory::new();
    let mut comparisons = ComparisonDataset::new();
    let mut acq_rng = rng_from(instance.seeds.acquisition);
    let mut proxy_rng = rng_from(instance.seeds.proxy);
    let mut scored = 0usize;
    let mut scored_correct = 0usize;
    let mut fallback_queries = 0usize;
    let mut last_finetune_log: Vec<TrainRecord> = Vec::new();

    for i in 1..=cfg.num_cqs {
        let (a, b) = cfg
            .acquisition
            .select(&ensemble, catalog, &history, &mut acq_rng)?;
        let mut record: ComparisonRecord = match proxy {
            ProxyRunner::Simulated { accuracy } => {
                simulated_answer(catalog, profile, a, b, *accuracy, &mut proxy_rng)?
            }
            ProxyRunner::Llm {
                backend,
                model,
                temperature,
                cot_enabled,
                max_retries,
                ..
            } => {
                let query_cfg = LlmQueryConfig {
                    model: model.clone(),
                    temperature: *temperature,
                    cot_enabled: *cot_enabled,
                    max_retries: *max_retries,
                    student: instance.index,
                    query_index: i,
                };
                llm_answer(
                    narrative.as_ref().expect("narrative generated for llm mode"),
                    a,
                    b,
                    &query_cfg,
                    backend.as_ref(),
                    transcripts,
                    &mut proxy_rng,
                )?
            }
        };
        // Ground truth is known in experiments: score LLM answers too.
        if record.source == AnswerSource::Llm {
            let (chosen, other) = match record.answer {
                crate::proxy::Choice::A => (a, b),
                crate::proxy::Choice::B => (b, a),
            };
            record.correct = Some(true_of(chosen) >= true_of(other));
        }
        if record.fallback_random {
            fallback_queries += 1;
        } else if let Some(correct) = record.correct {
            scored += 1;
            if correct {
                scored_correct += 1;
            }
        }
        history.insert(a, b);
        comparisons.push(ComparisonSample {
            first: a,
            second: b,
            first_preferred: record.answer == crate::proxy::Choice::A,
        })?;

        if i % cfg.finetune_interval == 0 || i == cfg.num_cqs {
            // Re-run the comparison phase from the post-regression anchor
            // on everything elicited so far: the model at any grid point is
            // the output of one mixed-training pass over its dataset.
            let round = i.div_ceil(cfg.finetune_interval) as u64;
            for (j, member) in ensemble.members.iter_mut().enumerate() {
                *member = snapshot[j].clone();
                let mut adam = AdamState::new(&ensemble.arch);
                let mut train_rng =
                    rng_from(derive_seed(instance.seeds.train, round, j as u64));
                let history = train_comparisons(
                    &ensemble.arch,
                    member,
                    &comparisons,
                    &train_cfg,
                    &mut adam,
                    &mut train_rng,
                )?;
                if cfg.log_training && j == 0 {
                    last_finetune_log = history;
                }
            }
        }

        if grid_points.contains(&i) {
            let (bundle, _) = allocate(catalog, &ensemble, &mut scratch);
            let true_value = true_of(bundle);
            grid.push(GridPoint {
                cqs: i,
                bundle,
                true_value,
                normalized_value: normalize(true_value),
                mae_c: mae_c_of(&ensemble, &mut scratch),
            });
        }
    }

    let metrics_after = metrics_at(&ensemble, &mut scratch);
    let final_normalized_value = grid
        .last()
        .map(|g| g.normalized_value)
        .unwrap_or(100.0);

    let result = StudentResult {
        schema_version: RESULT_SCHEMA_VERSION,
        student: instance.index,
        gui_bundle: baseline.gui_bundle,
        gui_true_value: baseline.gui_true_value,
        optimal_true_value: baseline.optimal_true_value,
        value_scale: baseline.value_scale,
        num_cqs: cfg.num_cqs,
        grid,
        final_normalized_value,
        proxy_accuracy: (scored > 0).then(|| scored_correct as f64 / scored as f64),
        fallback_queries,
        metrics_before,
        metrics_after,
        training_log: if cfg.log_training {
            let mut log = baseline.regression_log.clone();
            log.extend(last_finetune_log);
            log
        } else {
            Vec::new()
        },
    };
    Ok((result, ensemble))
}

/// Full single-student run: baseline preparation plus the CQ loop.
pub fn run_student(
    cfg: &ExperimentConfig,
    instance: &StudentInstance,
    proxy: &ProxyRunner,
    transcripts: &TranscriptStore,
) -> Result<StudentResult, HarnessError> {
    run_student_with_model(cfg, instance, proxy, transcripts).map(|(r, _)| r)
}

/// Full single-student run that also returns the final ensemble.
pub fn run_student_with_model(
    cfg: &ExperimentConfig,
    instance: &StudentInstance,
    proxy: &ProxyRunner,
    transcripts: &TranscriptStore,
) -> Result<(StudentResult, EnsembleModel), HarnessError> {
    let baseline = prepare_baseline(cfg, instance)?;
    run_cq_phase_with_model(cfg, instance, &baseline, proxy, transcripts)
}
