//! Command-line entry point: single runs, ablation suites, hyperparameter
//! search, and reporting over result directories.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use prefelicit::acquisition::AcquisitionKind;
use prefelicit::harness::config::{BackendKind, ProxyMode};
use prefelicit::harness::report::{self, print_suite_table};
use prefelicit::harness::suite::CellResult;
use prefelicit::harness::{
    generate_instances, hpo, run_student_with_model, run_suite, ExperimentConfig, ProxyRunner,
    Suite,
};
use prefelicit::mvnn::save_ensemble_to_path;
use prefelicit::proxy::TranscriptStore;

#[derive(Parser)]
#[command(
    name = "prefelicit",
    version,
    about = "Preference elicitation for combinatorial course assignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of students override.
    #[arg(long)]
    students: Option<usize>,
    /// Comparison-query budget override.
    #[arg(long)]
    num_cqs: Option<usize>,
    /// Proxy mode override: simulated or llm.
    #[arg(long)]
    proxy_mode: Option<String>,
    /// Simulated-proxy accuracy override.
    #[arg(long)]
    accuracy: Option<f64>,
    /// Chat-completion endpoint override (llm mode).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name override (llm mode).
    #[arg(long)]
    model: Option<String>,
    /// Backend override: http, scripted, or replay.
    #[arg(long)]
    backend: Option<String>,
    /// Replay fixture file (llm mode with the replay backend).
    #[arg(long)]
    replay_path: Option<PathBuf>,
    /// Record live exchanges as replay fixtures to this file.
    #[arg(long)]
    record_path: Option<PathBuf>,
    /// Acquisition override: double_ts, infomax, boltzmann, or random.
    #[arg(long)]
    acquisition: Option<String>,
    /// Write per-epoch training logs.
    #[arg(long)]
    log_training: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_path(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(students) = self.students {
            cfg.num_students = students;
        }
        if let Some(num_cqs) = self.num_cqs {
            cfg.num_cqs = num_cqs;
            if let Some(grid) = &mut cfg.eval.grid {
                grid.retain(|&g| g <= num_cqs);
            }
        }
        if let Some(mode) = &self.proxy_mode {
            cfg.proxy.mode = match mode.as_str() {
                "simulated" => ProxyMode::Simulated,
                "llm" => ProxyMode::Llm,
                other => bail!("unknown proxy mode '{other}'"),
            };
        }
        if let Some(accuracy) = self.accuracy {
            cfg.proxy.accuracy = accuracy;
        }
        if let Some(endpoint) = &self.endpoint {
            cfg.proxy.endpoint = endpoint.clone();
        }
        if let Some(model) = &self.model {
            cfg.proxy.model = model.clone();
        }
        if let Some(backend) = &self.backend {
            cfg.proxy.backend = match backend.as_str() {
                "http" => BackendKind::Http,
                "scripted" => BackendKind::Scripted,
                "replay" => BackendKind::Replay,
                other => bail!("unknown backend '{other}'"),
            };
        }
        if let Some(path) = &self.replay_path {
            cfg.proxy.replay_path = Some(path.clone());
        }
        if let Some(path) = &self.record_path {
            cfg.proxy.record_path = Some(path.clone());
        }
        if let Some(kind) = &self.acquisition {
            cfg.acquisition.kind = match kind.as_str() {
                "double_ts" | "doublets" => AcquisitionKind::DoubleTs,
                "infomax" => AcquisitionKind::Infomax,
                "boltzmann" => AcquisitionKind::Boltzmann,
                "random" => AcquisitionKind::Random,
                other => bail!("unknown acquisition '{other}'"),
            };
        }
        if self.log_training {
            cfg.log_training = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline for every student under one configuration.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long, default_value = "out/run")]
        out: PathBuf,
        /// Skip students whose result files already exist.
        #[arg(long)]
        resume: bool,
        /// Save each student's fine-tuned ensemble checkpoint.
        #[arg(long)]
        save_checkpoints: bool,
    },
    /// Run an ablation suite: main, noise_gamma, cot, gce_vs_bce,
    /// acquisition, or accuracy_grid.
    Suite {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        suite: String,
        #[arg(long, default_value = "out/suite")]
        out: PathBuf,
    },
    /// Random hyperparameter search with the simulated proxy.
    Hpo {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of sampled configurations.
        #[arg(long, default_value_t = 50)]
        budget: usize,
        /// Students evaluated per configuration.
        #[arg(long, default_value_t = 10)]
        seeds_per_trial: usize,
        /// Search-stream seed.
        #[arg(long, default_value_t = 7)]
        search_seed: u64,
        #[arg(long, default_value = "out/hpo")]
        out: PathBuf,
    },
    /// Print the tables found in a result directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            resume,
            save_checkpoints,
        } => cmd_run(&config.resolve()?, &out, resume, save_checkpoints),
        Command::Suite { config, suite, out } => {
            let suite: Suite = suite.parse().map_err(anyhow::Error::msg)?;
            cmd_suite(&config.resolve()?, suite, &out)
        }
        Command::Hpo {
            config,
            budget,
            seeds_per_trial,
            search_seed,
            out,
        } => cmd_hpo(&config.resolve()?, budget, seeds_per_trial, search_seed, &out),
        Command::Report { dir } => cmd_report(&dir),
    }
}

fn cmd_run(
    cfg: &ExperimentConfig,
    out: &Path,
    resume: bool,
    save_checkpoints: bool,
) -> Result<()> {
    let instances = generate_instances(cfg);
    report::write_run_inputs(out, cfg, &instances)?;
    let proxy = ProxyRunner::from_settings(&cfg.proxy)?;
    let errors: Mutex<Vec<anyhow::Error>> = Mutex::new(Vec::new());

    instances.par_iter().for_each(|instance| {
        if resume && report::student_result_exists(out, instance.index) {
            log::info!("student {} already done, skipping", instance.index);
            return;
        }
        let transcripts = match cfg.proxy.mode {
            ProxyMode::Llm => match TranscriptStore::to_path(
                out.join(format!("transcripts/student_{:04}.jsonl", instance.index)),
            ) {
                Ok(store) => store,
                Err(e) => {
                    errors.lock().unwrap().push(e.into());
                    return;
                }
            },
            ProxyMode::Simulated => TranscriptStore::disabled(),
        };
        match run_student_with_model(cfg, instance, &proxy, &transcripts) {
            Ok((result, ensemble)) => {
                if let Err(e) = report::write_student_result(out, &result) {
                    errors.lock().unwrap().push(e.into());
                    return;
                }
                if save_checkpoints {
                    let dir = out.join("checkpoints");
                    if let Err(e) = std::fs::create_dir_all(&dir).map_err(anyhow::Error::from)
                        .and_then(|_| {
                            save_ensemble_to_path(
                                dir.join(format!("student_{:04}.mvnn", instance.index)),
                                &ensemble,
                            )
                            .map_err(anyhow::Error::from)
                        })
                    {
                        errors.lock().unwrap().push(e);
                    }
                }
                log::info!(
                    "student {}: normalized value {:.2}",
                    instance.index,
                    result.final_normalized_value
                );
            }
            Err(e) => errors.lock().unwrap().push(e.into()),
        }
    });

    let errors = errors.into_inner().unwrap();
    if let Some(err) = errors.into_iter().next() {
        return Err(err.context("student run failed (completed students are resumable with --resume)"));
    }

    // Gather everything (including resumed students) for the aggregates.
    let results: Vec<_> = (0..cfg.num_students)
        .map(|i| report::read_student_result(out, i))
        .collect::<Result<_, _>>()?;
    report::write_summary_csv(out, &results)?;
    report::write_curves_csv(out, "run", &results, false)?;
    let cell = CellResult::from_students("run", &results);
    println!(
        "{} students: normalized value {:.2} +- {:.2} (95% CI), {:.0}% better, p = {:.3e}",
        cell.students, cell.mean_normalized_value, cell.ci95, cell.pct_better, cell.p_value
    );
    Ok(())
}

fn cmd_suite(cfg: &ExperimentConfig, suite: Suite, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let result = run_suite(suite, cfg, Some(out))?;
    let instances = generate_instances(cfg);
    report::write_suite_outputs(out, cfg, &instances, &result)?;
    print_suite_table(&result);
    Ok(())
}

fn cmd_hpo(
    cfg: &ExperimentConfig,
    budget: usize,
    seeds_per_trial: usize,
    search_seed: u64,
    out: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let (best, trials) = hpo::hpo_search(cfg, &hpo::HpoRanges::default(), budget, seeds_per_trial, search_seed)?;
    let mut log = std::fs::File::create(out.join("trials.jsonl"))?;
    use std::io::Write;
    for trial in &trials {
        serde_json::to_writer(&mut log, trial)?;
        log.write_all(b"\n")?;
    }
    std::fs::write(out.join("best_config.toml"), best.to_toml())?;
    let best_trial = trials
        .iter()
        .max_by(|a, b| a.objective.partial_cmp(&b.objective).unwrap())
        .expect("at least one trial");
    println!(
        "best of {budget} trials: objective {:.2} (epochs {}, lr {:.4}, wd {:.0e}, clip {}, q {:.3}, cqs {}, {})",
        best_trial.objective,
        best_trial.epochs,
        best_trial.lr,
        best_trial.weight_decay,
        best_trial.clip_norm,
        best_trial.q,
        best_trial.num_cqs,
        best_trial.acquisition,
    );
    println!("wrote {} and trials.jsonl", out.join("best_config.toml").display());
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<()> {
    let mut found = false;
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("suite_") && name.ends_with(".csv") {
            found = true;
            let suite: Suite = name["suite_".len()..name.len() - 4]
                .parse()
                .unwrap_or(Suite::Main);
            let cells = report::read_suite_csv(&path)?;
            print_suite_table(&prefelicit::harness::SuiteResult {
                suite,
                cells,
                per_student: vec![],
            });
            println!();
        }
    }
    let summary = dir.join("summary.csv");
    if summary.is_file() {
        found = true;
        println!("{}", std::fs::read_to_string(summary)?);
    }
    if !found {
        bail!("no summary.csv or suite_*.csv found in {}", dir.display());
    }
    Ok(())
}
