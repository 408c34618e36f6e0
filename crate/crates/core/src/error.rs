use std::io;

use thiserror::Error;

/// Errors produced by the simulator, estimators, optimizer and event log.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition (non-unit setting,
    /// angle out of range, projection off the spin lattice).
    #[error("validation error: {0}")]
    Validation(String),

    /// Not enough events to form an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Inputs are individually valid but do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// A correlation function produced a non-finite value.
    #[error("correlation function returned {value} at theta = {theta} rad")]
    Evaluation { theta: f64, value: f64 },

    /// A row of an event file could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A record violated the outcome lattice or a file-level invariant.
    #[error("data error (seq {seq:?}): {message}")]
    Data { seq: Option<u64>, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn data(seq: Option<u64>, msg: impl Into<String>) -> Self {
        Error::Data {
            seq,
            message: msg.into(),
        }
    }
}
