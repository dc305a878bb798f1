//! Command-line front end for `fracfilm`: configuration, experiment
//! orchestration and deterministic CSV/JSON artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use commands::{cmd_run, cmd_sweep, cmd_verify_operator, execute_run, RunOutcome, RunReport, SweepAxis};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("verification tolerance breached: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}
