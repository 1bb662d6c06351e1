use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use stepfreq::output::{emit_results, resolve_output_dir, OUTPUT_DIR_ENV};
use stepfreq::report::{ambiguity_text, resolution_text, validate};
use stepfreq::{Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "stepfreq",
    version,
    about = "Step-frequency compressive-sensing MIMO radar experiments"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment and write manifest, heatmap and trial records.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output directory (STEPFREQ_OUTPUT_DIR takes precedence).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Unambiguous range and velocity of the configured schedule.
    Ambiguity {
        #[command(flatten)]
        common: Common,
    },
    /// Velocity-resolution metric and stepping conditions.
    Resolution {
        #[command(flatten)]
        common: Common,
        /// Randomized condition draws to add to the report.
        #[arg(long, default_value_t = 0)]
        draws: usize,
    },
    /// Check model invariants for a config.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<Experiment> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.experiment.trials = trials;
    }
    Experiment::new(cfg).with_context(|| format!("invalid config {}", common.config.display()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common, out } => {
            let exp = load(&common)?;
            // -o beats the config file but not the environment
            let env_set = std::env::var_os(OUTPUT_DIR_ENV).is_some_and(|v| !v.is_empty());
            let dir = match out {
                Some(o) if !env_set => o,
                _ => resolve_output_dir(&exp.config, &PathBuf::from("stepfreq-out")),
            };
            let outcome = exp.run()?;
            emit_results(&exp, &outcome, &dir)?;
            let truth = outcome.map.truth_indices();
            let hits = outcome.records.iter().filter(|r| r.hits_all(&truth)).count();
            let false_trials = outcome.records.iter().filter(|r| r.false_cells(&truth) > 0).count();
            println!(
                "{} trials ({} failed): all targets in {hits}, false cells in {false_trials}",
                outcome.records.len(),
                outcome.failed()
            );
            info!("results in {}", dir.display());
            println!("wrote {}", dir.display());
            Ok(true)
        }
        Command::Ambiguity { common } => {
            print!("{}", ambiguity_text(&load(&common)?)?);
            Ok(true)
        }
        Command::Resolution { common, draws } => {
            print!("{}", resolution_text(&load(&common)?, draws)?);
            Ok(true)
        }
        Command::Validate { common } => {
            let checks = validate(&load(&common)?)?;
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
