//! Command-line front end for the probing-control toolkit.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 numerical
//! failure (CFL violation, degenerate posterior), 3 tolerance failure in
//! `evaluate`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Overrides;
use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Acceptance(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
            CliError::Acceptance(m) => write!(f, "{m}"),
        }
    }
}

impl From<spikectrl_core::Error> for CliError {
    fn from(err: spikectrl_core::Error) -> Self {
        if err.is_numerical() {
            CliError::Numerical(err.to_string())
        } else {
            CliError::Validation(err.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "spikectrl",
    about = "Solve, simulate and cross-check optimal probing controls for a jump process with unknown rate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the dynamic programming equation and export value/policy CSV
    /// plus run metadata.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate controlled trajectories with the solved (or zero) policy.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long = "lambda-true")]
        lambda_true: Option<f64>,
        /// "pde" or "zero".
        #[arg(long)]
        policy: Option<String>,
    },
    /// Monte Carlo cross-check of the solved value at configured points.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Re-export one time slice of a solved value/policy grid.
    ExportPolicy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Time of the slice to export.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            commands::cmd_solve(&cfg, &out)
        }
        Command::Simulate {
            config,
            out,
            seed,
            paths,
            lambda_true,
            policy,
        } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_simulate(
                &cfg,
                &out,
                &Overrides {
                    seed,
                    paths,
                    lambda_true,
                    policy,
                },
            )
        }
        Command::Evaluate {
            config,
            out,
            seed,
            paths,
        } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_evaluate(
                &cfg,
                &out,
                &Overrides {
                    seed,
                    paths,
                    lambda_true: None,
                    policy: None,
                },
            )
        }
        Command::ExportPolicy { config, out, time } => {
            let cfg = RunConfig::load(&config)?;
            commands::cmd_export_policy(&cfg, &out, time)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                CliError::Validation(_) => ExitCode::from(1),
                CliError::Numerical(_) => ExitCode::from(2),
                CliError::Acceptance(_) => ExitCode::from(3),
            }
        }
    }
}
