//! Error types shared across the engine.

use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Error)]
pub enum EngineError {
    /// Grid/tensor dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid or incomplete configuration (missing model parameter, bad init range, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or out-of-range input data (event files, streams).
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite values fed into a numeric operation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Internal contract violated by a caller (e.g. winner outside the layer).
    #[error("logic error: {0}")]
    Logic(String),

    /// Persistence format problems (bad magic, dims header mismatch).
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, EngineError>;
