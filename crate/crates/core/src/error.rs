use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum DreError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("invalid ratio vector: {0}")]
    InvalidRatio(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("zero class probability at index {index}; ratio would be zero (opt in to allow it)")]
    ZeroRatio { index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("empty sample set: {0}")]
    EmptySamples(String),

    #[error("auroc needs both classes present")]
    SingleClass,

    #[error("numerical abort at step {step}: loss = {loss}")]
    NumericalAbort { step: usize, loss: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DreError {
    /// True for errors that come from a diverging numerical procedure rather
    /// than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, DreError::NumericalAbort { .. })
    }
}

pub type Result<T> = std::result::Result<T, DreError>;
