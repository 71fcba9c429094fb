//! Batch driver: run configurations, continuation with checkpoints, and
//! CSV reports for the `khessian` binary.

pub mod commands;
pub mod config;
pub mod report;

use std::fmt;

/// Failures, each with a fixed process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments (64).
    Config(String),
    /// Missing or unreadable input file (66).
    MissingInput(String),
    /// Output could not be written (74).
    Io(String),
    /// A solve stage or an analysis step failed (2).
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 64,
            CliError::MissingInput(_) => 66,
            CliError::Io(_) => 74,
            CliError::Failed(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::MissingInput(m) => write!(f, "cannot read input: {m}"),
            CliError::Io(m) => write!(f, "cannot write output: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<khessian::Error> for CliError {
    fn from(e: khessian::Error) -> Self {
        match e {
            khessian::Error::Config(m) => CliError::Config(m),
            khessian::Error::Io(e) => CliError::Io(e.to_string()),
            e => CliError::Failed(e.to_string()),
        }
    }
}
