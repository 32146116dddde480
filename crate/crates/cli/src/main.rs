//! `mlmcmc` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime or model error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mlmcmc::harness::{self, parse_config, render_table, HarnessError};
use mlmcmc::models::darcy;

#[derive(Parser)]
#[command(name = "mlmcmc", version, about = "Coupled multilevel MCMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of replicates.
        #[arg(long)]
        replicates: Option<usize>,
        /// Overrides the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute and print the summary of a run directory from its sample files.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Parse and validate a config, printing it with defaults resolved.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Regenerate the Darcy ground truth and synthetic observations.
    GenDarcyData {
        /// Directory receiving theta_true.txt and data.txt.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = darcy::FIXTURE_THETA_SEED)]
        theta_seed: u64,
        #[arg(long, default_value_t = darcy::FIXTURE_NOISE_SEED)]
        noise_seed: u64,
        #[arg(long, default_value_t = darcy::FIXTURE_LEVEL)]
        level: usize,
    },
}

fn run(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run {
            config,
            seed,
            replicates,
            out,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replicates {
                cfg.n_replicates = r;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            let artifacts = harness::run_experiment(&cfg)?;
            print!("{}", harness::emit_summary(&artifacts));
            eprintln!("wrote {}", artifacts.output_dir.display());
        }
        Command::Summarize { input } => {
            let summary = harness::summarize_dir(&input)?;
            print!("{}", render_table(&summary));
            let stored = input.join("summary.json");
            if stored.exists() && harness::read_summary(&stored)? != summary {
                return Err(HarnessError::Mismatch(format!("{} differs from the sample files", stored.display())));
            }
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            println!("{}", cfg.to_json_pretty());
        }
        Command::GenDarcyData {
            out,
            theta_seed,
            noise_seed,
            level,
        } => gen_darcy(&out, theta_seed, noise_seed, level)?,
    }
    Ok(())
}

fn gen_darcy(out: &Path, theta_seed: u64, noise_seed: u64, level: usize) -> Result<(), HarnessError> {
    let theta = darcy::sample_theta_true(theta_seed);
    let data = darcy::generate_synthetic_data(level, &theta, noise_seed).map_err(|e| HarnessError::Sampler {
        replicate: 0,
        source: e.into(),
    })?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("theta_true.txt"), darcy::format_fixture(theta.as_slice()))?;
    std::fs::write(out.join("data.txt"), darcy::format_fixture(&data))?;
    println!("theta_true = {:?}", theta.as_slice());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
