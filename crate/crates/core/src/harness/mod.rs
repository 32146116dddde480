//! Config-driven experiment runner.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! config.json              resolved config
//! summary.json             ExperimentSummary (recomputable from the CSVs)
//! diagnostics.json         wall times, resync counts, sub-chain lengths
//! rep_000/level_0.csv ...  post-burn-in streams, one file per level
//! ```

pub mod config;
pub mod samples;
pub mod summary;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::SamplerError;
use crate::estimator::{run_ml_mcmc, LevelRun, LevelSpec, RunOptions};
use crate::kernel::AdaptState;

pub use config::{parse_config, ConfigError, CouplingKind, ExperimentConfig};
pub use summary::{render_table, ExperimentSummary, LevelSummary, Provenance, ReplicateSummary};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MLMCMC_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("replicate {replicate}: {source}")]
    Sampler {
        replicate: u32,
        #[source]
        source: SamplerError,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad sample file {0}")]
    Samples(String),
    #[error("summary mismatch: {0}")]
    Mismatch(String),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub level: usize,
    pub resync_count: usize,
    pub resync_joint_accepts: usize,
    pub adapt_fine: Option<AdaptState<f64>>,
    pub adapt_coarse: Option<AdaptState<f64>>,
    pub t_sub: Option<usize>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDiagnostics {
    pub replicate: u32,
    pub wall_time_secs: f64,
    pub levels: Vec<LevelDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub wall_time_secs: f64,
    pub replicates: Vec<ReplicateDiagnostics>,
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub summary: ExperimentSummary,
    pub diagnostics: RunDiagnostics,
    /// `sample_files[r][ℓ]`.
    pub sample_files: Vec<Vec<PathBuf>>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_json_pretty().as_bytes()))
}

pub fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        config_sha256: config_hash(cfg),
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
    }
}

pub fn replicate_dir(root: &Path, replicate: u32) -> PathBuf {
    root.join(format!("rep_{replicate:03}"))
}

pub fn level_file(root: &Path, replicate: u32, level: usize) -> PathBuf {
    replicate_dir(root, replicate).join(format!("level_{level}.csv"))
}

/// Cost charged to a level: every iteration evaluates the fine and, above level 0, the coarse density.
pub fn level_cost(cfg: &ExperimentConfig, level: usize) -> f64 {
    let c = cfg.model.cost(level) + if level > 0 { cfg.model.cost(level - 1) } else { 0.0 };
    cfg.n_samples[level] as f64 * c
}

pub fn level_specs(cfg: &ExperimentConfig) -> Vec<LevelSpec<f64>> {
    (0..=cfg.max_level)
        .map(|l| LevelSpec {
            level: l,
            target: cfg.model.target(l),
            cost_per_eval: cfg.model.cost(l),
            n_samples: cfg.n_samples[l],
            burn_in: cfg.burn_in[l],
        })
        .collect()
}

/// Runs one replicate without touching the file system.
pub fn run_replicate(cfg: &ExperimentConfig, replicate: u32) -> Result<Vec<LevelRun<f64>>, HarnessError> {
    let coupling = cfg.build_coupling()?;
    let opts = RunOptions {
        stall_limit: cfg.stall_limit,
        replicate,
    };
    run_ml_mcmc(&level_specs(cfg), &coupling, &cfg.level0_sampler(), cfg.model.initial_theta(), cfg.seed, &opts)
        .map(|r| r.per_level)
        .map_err(|source| HarnessError::Sampler { replicate, source })
}

fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| HarnessError::Io(std::io::Error::other(e)))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs every replicate, writes samples and summaries, and returns the artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    let root = cfg.output_dir.clone();
    std::fs::create_dir_all(&root)?;
    std::fs::write(root.join("config.json"), cfg.to_json_pretty() + "\n")?;
    let d = cfg.dim();
    let start = Instant::now();

    let pool = thread_pool()?;
    let reps: Vec<(ReplicateSummary, ReplicateDiagnostics, Vec<PathBuf>)> = pool.install(|| {
        (0..cfg.n_replicates as u32)
            .into_par_iter()
            .map(|r| {
                let t0 = Instant::now();
                let runs = run_replicate(cfg, r)?;
                let wall = t0.elapsed().as_secs_f64();
                std::fs::create_dir_all(replicate_dir(&root, r))?;
                let mut files = Vec::with_capacity(runs.len());
                for run in &runs {
                    let path = level_file(&root, r, run.level);
                    samples::write_level_csv(&path, run, d, cfg.burn_in[run.level])?;
                    files.push(path);
                }
                let diag = ReplicateDiagnostics {
                    replicate: r,
                    wall_time_secs: wall,
                    levels: runs
                        .iter()
                        .map(|run| LevelDiagnostics {
                            level: run.level,
                            resync_count: run.resync_count,
                            resync_joint_accepts: run.resync_joint_accepts,
                            adapt_fine: run.adapt_fine.clone(),
                            adapt_coarse: run.adapt_coarse.clone(),
                            t_sub: run.t_sub,
                            cost: run.cost,
                        })
                        .collect(),
                };
                Ok((ReplicateSummary::from_runs(r, &runs), diag, files))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;

    let mut replicates = Vec::with_capacity(reps.len());
    let mut diags = Vec::with_capacity(reps.len());
    let mut sample_files = Vec::with_capacity(reps.len());
    for (s, dg, f) in reps {
        replicates.push(s);
        diags.push(dg);
        sample_files.push(f);
    }
    let summary = ExperimentSummary {
        provenance: provenance(cfg),
        across: summary::AcrossSummary::from_replicates(&replicates),
        replicates,
    };
    let diagnostics = RunDiagnostics {
        wall_time_secs: start.elapsed().as_secs_f64(),
        replicates: diags,
    };
    write_json(&root.join("summary.json"), &summary)?;
    write_json(&root.join("diagnostics.json"), &diagnostics)?;
    Ok(RunArtifacts {
        output_dir: root,
        summary,
        diagnostics,
        sample_files,
    })
}

/// Prints the summary table (plus wall time) and returns the text that was printed.
pub fn emit_summary(artifacts: &RunArtifacts) -> String {
    let mut text = render_table(&artifacts.summary);
    text.push_str(&format!("wall time {:.2} s\n", artifacts.diagnostics.wall_time_secs));
    print!("{text}");
    text
}

pub fn read_summary(path: &Path) -> Result<ExperimentSummary, HarnessError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Rebuilds the summary of a run directory from `config.json` and the sample files alone.
pub fn summarize_dir(dir: &Path) -> Result<ExperimentSummary, HarnessError> {
    let cfg = parse_config(&dir.join("config.json"))?;
    let d = cfg.dim();
    let mut replicates = Vec::new();
    for r in 0..cfg.n_replicates as u32 {
        let runs = (0..=cfg.max_level)
            .map(|l| samples::read_level_csv(&level_file(dir, r, l), l, d, level_cost(&cfg, l)))
            .collect::<Result<Vec<_>, _>>()?;
        replicates.push(ReplicateSummary::from_runs(r, &runs));
    }
    Ok(ExperimentSummary {
        provenance: provenance(&cfg),
        across: summary::AcrossSummary::from_replicates(&replicates),
        replicates,
    })
}

/// Recomputes the summary and checks it against the stored `summary.json`.
pub fn verify_dir(dir: &Path) -> Result<ExperimentSummary, HarnessError> {
    let recomputed = summarize_dir(dir)?;
    let stored = read_summary(&dir.join("summary.json"))?;
    if stored != recomputed {
        return Err(HarnessError::Mismatch(format!("{} differs from the sample files", dir.join("summary.json").display())));
    }
    Ok(recomputed)
}
