//! Batch driver for the minimax predictive density library: configuration,
//! subcommands and CSV/JSON/SVG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use clap::{Parser, Subcommand};

pub use commands::{dispatch, Outcome};
pub use config::{Command, ExperimentConfig, Options};
pub use error::CliError;

pub const THREADS_ENV: &str = "PRED_MINIMAX_THREADS";

#[derive(Parser, Debug)]
#[command(name = "pred-minimax", version, about = "Minimax predictive densities over Gaussian ellipsoids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Closed-form and Monte Carlo risks of the linear-minimax, flat-prior,
    /// oracle and plug-in rules.
    Risk(Options),
    /// Least-favorable prior: multiplier, cutoff, risk and variance profile.
    Waterfill(Options),
    /// Rate-scaled risk across a ladder of sample sizes.
    Asymptotics(Options),
    /// Predictive versus plug-in risk constants across smoothness levels.
    Figure1(Options),
    /// Monte Carlo equivalence, lower-bound squeeze and tail checks.
    Verify(Options),
}

impl Sub {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let (cmd, opts) = match self {
            Sub::Risk(o) => (Command::Risk, o),
            Sub::Waterfill(o) => (Command::Waterfill, o),
            Sub::Asymptotics(o) => (Command::Asymptotics, o),
            Sub::Figure1(o) => (Command::Figure1, o),
            Sub::Verify(o) => (Command::Verify, o),
        };
        ExperimentConfig::resolve(cmd, opts)
    }
}

/// Sizes the global rayon pool from `PRED_MINIMAX_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Parses, runs and reports; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = init_threads().and_then(|_| cli.command.resolve()).and_then(|cfg| dispatch(&cfg));
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            for p in &outcome.paths {
                println!("wrote {}", p.display());
            }
            match outcome.failure {
                None => 0,
                Some(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
