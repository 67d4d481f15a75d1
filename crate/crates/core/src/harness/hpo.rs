//! Random hyperparameter search over the comparison-phase knobs, scored by
//! mean normalized allocated value over a handful of seeds with the
//! simulated proxy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionKind;
use crate::proxy::TranscriptStore;
use crate::training::LossKind;

use super::config::{ExperimentConfig, ProxyMode};
use super::stats::mean;
use super::student::{generate_instances, run_student, ProxyRunner};
use super::HarnessError;

/// Search ranges; defaults cover the published sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HpoRanges {
    pub batch_sizes: Vec<usize>,
    pub epochs: Vec<usize>,
    /// Log-uniform bounds on the comparison learning rate.
    pub lr_bounds: (f64, f64),
    pub weight_decays: Vec<f64>,
    pub clip_norms: Vec<f64>,
    /// Uniform bounds on the GCE q.
    pub q_bounds: (f64, f64),
    pub num_cqs: Vec<usize>,
    pub acquisitions: Vec<AcquisitionKind>,
}

impl Default for HpoRanges {
    fn default() -> Self {
        HpoRanges {
            batch_sizes: vec![1, 2, 4, 8, 16, 32],
            epochs: vec![2, 5, 10, 20, 50, 100, 200, 500, 1000],
            lr_bounds: (1e-4, 0.1),
            weight_decays: vec![0.0, 1e-8, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            clip_norms: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
            q_bounds: (0.001, 1.0),
            num_cqs: vec![200, 300, 500],
            acquisitions: vec![
                AcquisitionKind::Boltzmann,
                AcquisitionKind::Infomax,
                AcquisitionKind::Random,
                AcquisitionKind::DoubleTs,
            ],
        }
    }
}

/// One evaluated configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HpoTrial {
    pub index: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub q: f64,
    pub num_cqs: usize,
    pub acquisition: AcquisitionKind,
    /// Mean normalized allocated value over the evaluation seeds.
    pub objective: f64,
}

fn pick<'a, T, R: Rng + ?Sized>(items: &'a [T], rng: &mut R) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn sample_trial<R: Rng + ?Sized>(ranges: &HpoRanges, index: usize, rng: &mut R) -> HpoTrial {
    let (lo, hi) = ranges.lr_bounds;
    let lr = (lo.ln() + rng.random_range(0.0..1.0) * (hi.ln() - lo.ln())).exp();
    let (qlo, qhi) = ranges.q_bounds;
    HpoTrial {
        index,
        batch_size: *pick(&ranges.batch_sizes, rng),
        epochs: *pick(&ranges.epochs, rng),
        lr,
        weight_decay: *pick(&ranges.weight_decays, rng),
        clip_norm: *pick(&ranges.clip_norms, rng),
        q: rng.random_range(qlo..qhi),
        num_cqs: *pick(&ranges.num_cqs, rng),
        acquisition: *pick(&ranges.acquisitions, rng),
        objective: f64::NAN,
    }
}

fn apply_trial(base: &ExperimentConfig, trial: &HpoTrial) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.train.comparison_batch_size = trial.batch_size;
    cfg.train.comparison_epochs = trial.epochs;
    cfg.train.comparison_lr = trial.lr;
    cfg.train.comparison_l2 = trial.weight_decay;
    cfg.train.grad_clip_norm = trial.clip_norm.max(f64::MIN_POSITIVE);
    cfg.train.loss = LossKind::Gce { q: trial.q };
    cfg.num_cqs = trial.num_cqs;
    cfg.acquisition.kind = trial.acquisition;
    // Objective needs only the endpoint allocation.
    cfg.eval.grid = Some(vec![0, trial.num_cqs]);
    cfg.proxy.mode = ProxyMode::Simulated;
    cfg
}

/// Random search: samples `budget` configurations, evaluates each on
/// `seeds_per_trial` students with the simulated proxy, and returns the
/// winner (first trial wins ties) plus the full log.
pub fn hpo_search(
    base: &ExperimentConfig,
    ranges: &HpoRanges,
    budget: usize,
    seeds_per_trial: usize,
    search_seed: u64,
) -> Result<(ExperimentConfig, Vec<HpoTrial>), HarnessError> {
    use rayon::prelude::*;

    let mut rng = crate::seeds::rng_from(search_seed);
    let mut trials: Vec<HpoTrial> = (0..budget)
        .map(|i| sample_trial(ranges, i, &mut rng))
        .collect();

    let mut eval_base = base.clone();
    eval_base.num_students = seeds_per_trial;

    let objectives: Vec<Result<f64, HarnessError>> = trials
        .par_iter()
        .map(|trial| {
            let cfg = apply_trial(&eval_base, trial);
            cfg.validate()?;
            let instances = generate_instances(&cfg);
            let proxy = ProxyRunner::from_settings(&cfg.proxy)?;
            let transcripts = TranscriptStore::disabled();
            let values: Result<Vec<f64>, HarnessError> = instances
                .iter()
                .map(|instance| {
                    run_student(&cfg, instance, &proxy, &transcripts)
                        .map(|r| r.final_normalized_value)
                })
                .collect();
            Ok(mean(&values?))
        })
        .collect();

    for (trial, objective) in trials.iter_mut().zip(objectives) {
        trial.objective = objective?;
    }

    let best = trials
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.objective
                .partial_cmp(&b.objective)
                .unwrap()
                .then(ib.cmp(ia)) // earlier trial wins exact ties
        })
        .map(|(_, t)| t.clone())
        .expect("budget >= 1");

    Ok((apply_trial(base, &best), trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_base() -> ExperimentConfig {
        ExperimentConfig {
            catalog: crate::domain::CourseCatalog::new(8, 3).unwrap(),
            ensemble_size: 2,
            regression_set_size: 60,
            train: crate::training::TrainConfig {
                regression_epochs: 60,
                ..Default::default()
            },
            eval: super::super::config::EvalConfig {
                eval_set_size: 50,
                ..Default::default()
            },
            acquisition: crate::acquisition::QuerySelector {
                pool_size: 16,
                ..Default::default()
            },
            ..ExperimentConfig::default()
        }
    }

    fn tiny_ranges() -> HpoRanges {
        HpoRanges {
            epochs: vec![2, 5],
            num_cqs: vec![5, 10],
            ..HpoRanges::default()
        }
    }

    #[test]
    fn budget_one_returns_the_single_sample() {
        let base = tiny_base();
        let (best, trials) = hpo_search(&base, &tiny_ranges(), 1, 2, 9).unwrap();
        assert_eq!(trials.len(), 1);
        assert_eq!(best.num_cqs, trials[0].num_cqs);
        assert_eq!(best.train.comparison_epochs, trials[0].epochs);
        assert!(trials[0].objective.is_finite());
    }

    #[test]
    fn search_is_deterministic() {
        let base = tiny_base();
        let (_, t1) = hpo_search(&base, &tiny_ranges(), 3, 2, 123).unwrap();
        let (_, t2) = hpo_search(&base, &tiny_ranges(), 3, 2, 123).unwrap();
        let summary = |ts: &[HpoTrial]| {
            ts.iter()
                .map(|t| (t.batch_size, t.epochs, t.num_cqs, t.objective.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(summary(&t1), summary(&t2));
    }

    #[test]
    fn ties_go_to_the_first_trial() {
        let mut trials = vec![
            HpoTrial {
                index: 0,
                batch_size: 1,
                epochs: 2,
                lr: 0.01,
                weight_decay: 0.0,
                clip_norm: 0.2,
                q: 0.3,
                num_cqs: 5,
                acquisition: AcquisitionKind::Random,
                objective: 100.0,
            };
            3
        ];
        trials[1].index = 1;
        trials[2].index = 2;
        let best = trials
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.objective
                    .partial_cmp(&b.objective)
                    .unwrap()
                    .then(ib.cmp(ia))
            })
            .map(|(_, t)| t.clone())
            .unwrap();
        assert_eq!(best.index, 0);
    }

    #[test]
    fn samples_stay_in_ranges() {
        let ranges = HpoRanges::default();
        let mut rng = crate::seeds::rng_from(5);
        for i in 0..200 {
            let t = sample_trial(&ranges, i, &mut rng);
            assert!(ranges.batch_sizes.contains(&t.batch_size));
            assert!(ranges.epochs.contains(&t.epochs));
            assert!(t.lr >= 1e-4 && t.lr <= 0.1);
            assert!(ranges.weight_decays.contains(&t.weight_decay));
            assert!(ranges.clip_norms.contains(&t.clip_norm));
            assert!(t.q > 0.0 && t.q < 1.0);
            assert!(ranges.num_cqs.contains(&t.num_cqs));
        }
    }
}
