//! Command-line front end for the `ewps-core` library: CSV ingestion,
//! fitting and model comparison, sampling, and plot-ready grids.

use std::fmt;
use std::io::Write;

pub mod args;
pub mod commands;
pub mod ingest;
pub mod output;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const NOT_CONVERGED: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

/// A failure carrying the exit status it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ewps_core::Error> for CliError {
    fn from(e: ewps_core::Error) -> Self {
        use ewps_core::Error as E;
        let code = match &e {
            E::Validation(_) => exit::USAGE,
            E::Convergence { .. } | E::Fit { .. } => exit::NOT_CONVERGED,
            E::Domain(_) | E::Overflow(_) | E::Integrability(_) => exit::NUMERIC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Runs one command, writing results to `out` and diagnostics to `err`;
/// returns the exit status.
pub fn run(cli: &args::Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match commands::dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}
