use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by preprocessing, models and the selection engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: need at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("timestamps must be strictly increasing (violated at index {index})")]
    UnorderedTimestamps { index: usize },

    #[error("column '{0}' is constant and cannot be scaled")]
    ConstantColumn(String),

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("duplicate column '{0}'")]
    DuplicateColumn(String),

    #[error("column '{name}' has length {got}, expected {expected}")]
    ColumnLength {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("anchor length {got} does not match lag {expected}")]
    AnchorMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    Empty,

    #[error("missing values present in '{0}'")]
    MissingValues(String),

    #[error("column '{0}' has no observed values")]
    AllMissingColumn(String),

    #[error("missing exogenous columns: {}", .0.join(", "))]
    MissingExogenous(Vec<String>),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("unknown commodity '{0}'")]
    UnknownCommodity(String),

    #[error("file {0} contains no data rows")]
    EmptyFile(PathBuf),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter '{name}': {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("regression design matrix is singular")]
    SingularRegression,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("series has zero variance")]
    ConstantSeries,

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("no differencing order up to 2 makes the series stationary")]
    NoStationaryTransform,

    #[error("optimizer did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("series is degenerate: {0}")]
    DegenerateSeries(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no training data")]
    EmptyData,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("horizon {horizon} exceeds maximum {max}")]
    HorizonTooLarge { horizon: usize, max: usize },

    #[error("horizon must be at least 1")]
    InvalidHorizon,

    #[error("every candidate in the {0} grid failed")]
    GridExhausted(String),

    #[error("evaluation report is empty")]
    EmptyReport,

    #[error("{family} does not support {mode} mode")]
    UnsupportedMode { family: String, mode: String },

    #[error("artifact is corrupt: {0}")]
    CorruptArtifact(String),

    #[error("unsupported artifact version '{found}'")]
    VersionMismatch { found: String },

    #[error("artifact '{0}' not found")]
    ArtifactNotFound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Coarse classification used for process exit codes and HTTP mapping.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::TooShort { .. }
                | Error::UnorderedTimestamps { .. }
                | Error::ConstantColumn(_)
                | Error::UnknownColumn(_)
                | Error::DuplicateColumn(_)
                | Error::ColumnLength { .. }
                | Error::MissingValues(_)
                | Error::AllMissingColumn(_)
                | Error::MissingExogenous(_)
                | Error::Parse { .. }
                | Error::UnknownCommodity(_)
                | Error::EmptyFile(_)
                | Error::InvalidSpec(_)
                | Error::Io(_)
        )
    }
}
