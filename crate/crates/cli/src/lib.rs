//! Command-line front end: geodesic shooting, boundary-value and sequence splines,
//! and the invariant check suite. Numerics come from a JSON config file; flags only
//! choose paths, verbosity and the seed.

mod checks;
mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::Value;

pub use checks::{run_checks, CheckConfig};

#[derive(Debug, Parser)]
#[command(
    name = "diffspline",
    version,
    about = "Geodesics and splines of diffeomorphisms of the flat torus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Problem JSON; relative field paths inside it resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Shoot a geodesic from an initial momentum or velocity.
    Geodesic,
    /// Solve a boundary-value spline problem.
    Spline,
    /// Interpolate a sequence of knots.
    Sequence,
    /// Run the invariant checks.
    Check,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] diffspline::error::Error),
    #[error("solver did not converge; results written to {0}")]
    NotConverged(String),
    #[error("checks failed: {0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.code(),
            CliError::NotConverged(_) => "not-converged",
            CliError::ChecksFailed(_) => "check-failed",
        }
    }

    /// `error[<code>]: <message>` on a single line.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.code())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// A command's JSON summary plus the failure that decides the exit status, if any.
/// Failing solves and checks still produce a summary and their output files.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Value,
    pub failure: Option<CliError>,
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Geodesic => commands::geodesic(cli),
        Command::Spline => commands::spline(cli),
        Command::Sequence => commands::sequence(cli),
        Command::Check => commands::check(cli),
    }
}

/// Pretty JSON with sorted keys.
pub fn to_sorted_json(value: &impl serde::Serialize) -> String {
    // serde_json's default map is ordered by key
    let v = serde_json::to_value(value).expect("serializable");
    serde_json::to_string_pretty(&v).expect("json")
}
