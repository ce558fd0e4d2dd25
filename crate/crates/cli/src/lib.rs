//! Experiment front end: declarative TOML configs, train/infer/trace
//! commands, and deterministic run artifacts.

// Validation guards are written `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which a plain `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;

use spikestep_core::EngineError;

pub mod commands;
pub mod config;
pub mod setup;

/// Process-level failure classes, mapped onto exit codes: validation
/// problems exit 2, everything else that fails exits 1.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, bad input data, or bad file formats.
    Validation(String),
    /// Failures while executing an otherwise valid run.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Runtime(msg) => write!(f, "run failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<EngineError> for CliError {
    fn from(err: EngineError) -> Self {
        match err {
            EngineError::Config(_)
            | EngineError::Data(_)
            | EngineError::Format(_)
            | EngineError::Shape(_) => CliError::Validation(err.to_string()),
            EngineError::Io(_) | EngineError::Numeric(_) | EngineError::Logic(_) => {
                CliError::Runtime(err.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
