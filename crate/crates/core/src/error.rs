//! Crate-wide error type.
//!
//! Pipelines here chain several stages (standardization, radius selection,
//! ADMM, clustering, allocation), so a single error enum keeps propagation
//! simple and lets the CLI map failures onto exit codes.

use thiserror::Error;

/// Errors produced by any stage of the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A column of the input has (numerically) zero sample variance.
    #[error("column {0} has zero sample variance and cannot be standardized")]
    ZeroVarianceColumn(usize),

    /// Input data contains NaN or infinite entries, or is malformed.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A block-model specification is internally inconsistent.
    #[error("invalid block model spec: {0}")]
    InvalidSpec(String),

    /// The covariance matrix is singular (or numerically so).
    #[error("covariance matrix is singular")]
    SingularCovariance,

    /// An iterative solver failed to reach its tolerance.
    #[error("solver stalled: {0}")]
    SolverStalled(String),

    /// Method (a) of the Upsilon estimator would exceed the memory cap.
    #[error("estimating the full covariance needs {required} bytes (cap {cap}); use the diagonal method")]
    MemoryCapExceeded { required: usize, cap: usize },

    /// The Upsilon estimate contains negative variances or is unusable.
    #[error("invalid upsilon estimate: {0}")]
    InvalidUpsilon(String),

    /// Cross-validation folds cannot be formed.
    #[error("invalid folds: {0}")]
    InvalidFolds(String),

    /// An operation needs more variables than the input provides.
    #[error("operation needs at least {needed} variables, got {got}")]
    InsufficientVariables { needed: usize, got: usize },

    /// A cluster count larger than the number of items.
    #[error("cluster count {k} exceeds the number of items {d}")]
    InvalidK { k: usize, d: usize },

    /// An eigensolver or other numerical routine failed.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Mismatched inputs (lengths, dimensions).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A CSV file could not be parsed.
    #[error("invalid csv: {0}")]
    InvalidCsv(String),

    /// Every ticker was removed by the data filters.
    #[error("no tickers remain after filtering")]
    EmptyUniverse,

    /// The return panel is too short for the first lookback window.
    #[error("insufficient history: need {required} rows, have {available}")]
    InsufficientHistory { required: usize, available: usize },

    /// The covariance handed to the allocator is not positive semidefinite.
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
