//! Seed sweeps: one training run per seed, per-seed CSVs, and a cross-seed
//! aggregate recomputed from the files as written.

use crate::metrics::{
    aggregate, read_seed_csv, write_aggregate_csv, write_seed_csv, MetricsError,
};
use ata_core::checkpoint::{merge_named, save_params};
use ata_core::config::ExperimentConfig;
use ata_core::trainer::{run_training, TrainOutcome};
use std::fmt;
use std::path::{Path, PathBuf};

/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "ATA_OUT_DIR";

#[derive(Debug)]
pub enum SweepError {
    Io(std::io::Error),
    Metrics(MetricsError),
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepError::Io(e) => write!(f, "sweep io error: {e}"),
            SweepError::Metrics(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SweepError {}

impl From<std::io::Error> for SweepError {
    fn from(e: std::io::Error) -> Self {
        SweepError::Io(e)
    }
}

impl From<MetricsError> for SweepError {
    fn from(e: MetricsError) -> Self {
        SweepError::Metrics(e)
    }
}

/// Result of one sweep: where files landed and which seeds failed.
pub struct SweepReport {
    pub out_dir: PathBuf,
    pub seed_csvs: Vec<PathBuf>,
    pub aggregate_csv: Option<PathBuf>,
    pub failures: Vec<(u64, String)>,
}

/// Resolves the output directory, honoring the env-var override.
pub fn resolve_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var(OUT_DIR_ENV) {
        Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(&cfg.out_dir),
    }
}

pub fn seed_csv_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("seed_{seed}.csv"))
}

/// Runs one seed end to end and writes its artifacts. Returns the outcome
/// for callers that evaluate the trained policies further.
pub fn run_one_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<TrainOutcome, String> {
    let outcome = run_training(cfg, seed).map_err(|e| e.to_string())?;
    write_seed_csv(&seed_csv_path(out_dir, seed), &outcome.metrics)
        .map_err(|e| e.to_string())?;
    if cfg.save_models {
        let named = outcome.learner.named_params();
        save_params(&merge_named(&named), &out_dir.join(format!("seed_{seed}_policies.ckpt")))
            .map_err(|e| e.to_string())?;
        if let Some(model) = &outcome.reward_model {
            let named = vec![("reward_model".to_string(), model.params().clone())];
            save_params(
                &merge_named(&named),
                &out_dir.join(format!("seed_{seed}_reward_model.ckpt")),
            )
            .map_err(|e| e.to_string())?;
        }
    }
    Ok(outcome)
}

/// Runs every configured seed, writes per-seed CSVs, the resolved config,
/// and the aggregate CSV. Per-seed failures are recorded and the sweep
/// continues.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, SweepError> {
    let out_dir = resolve_out_dir(cfg);
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("config_resolved.cfg"), cfg.serialize())?;

    let mut failures: Vec<(u64, String)> = Vec::new();
    let mut completed: Vec<u64> = Vec::new();

    if cfg.parallel_seeds {
        let results: Vec<(u64, Result<(), String>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = cfg
                .seeds
                .iter()
                .map(|&seed| {
                    let out_dir = out_dir.clone();
                    let cfg = cfg.clone();
                    scope.spawn(move || {
                        let r = run_one_seed(&cfg, seed, &out_dir).map(|_| ());
                        (seed, r)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("seed thread")).collect()
        });
        for (seed, result) in results {
            match result {
                Ok(()) => completed.push(seed),
                Err(e) => failures.push((seed, e)),
            }
        }
    } else {
        for &seed in &cfg.seeds {
            match run_one_seed(cfg, seed, &out_dir) {
                Ok(_) => completed.push(seed),
                Err(e) => failures.push((seed, e)),
            }
        }
    }
    completed.sort_unstable();

    let mut seed_csvs = Vec::new();
    let aggregate_csv = if completed.is_empty() {
        None
    } else {
        let mut per_seed = Vec::with_capacity(completed.len());
        for &seed in &completed {
            let path = seed_csv_path(&out_dir, seed);
            per_seed.push(read_seed_csv(&path)?);
            seed_csvs.push(path);
        }
        let agg = aggregate(&per_seed)?;
        let path = out_dir.join("aggregate.csv");
        write_aggregate_csv(&path, &agg)?;
        Some(path)
    };

    if !failures.is_empty() {
        let report = failures
            .iter()
            .map(|(s, e)| format!("seed {s}: {e}"))
            .collect::<Vec<_>>()
            .join("\n");
        std::fs::write(out_dir.join("failures.log"), report)?;
    }

    Ok(SweepReport {
        out_dir,
        seed_csvs,
        aggregate_csv,
        failures,
    })
}
