use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the library.
///
/// Variants are grouped by how a caller is expected to react: configuration
/// problems, bad input data, and solver size guards. [`Error::category`]
/// exposes that grouping so front ends can map it onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported pairing: {kernel} kernel cannot be used with {target} target in {mode} mode")]
    UnsupportedPairing {
        kernel: String,
        target: String,
        mode: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {what} has {found} rows but {expected} were expected")]
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("point not found in the candidate set; score-only targets can only be queried at stored points")]
    Lookup,

    #[error("index {index} out of range for {len} candidates")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("instance too large: {count} candidate solutions exceed the enumeration limit of {limit}")]
    InstanceTooLarge { count: u128, limit: u128 },

    #[error("negative squared discrepancy {0:e} beyond rounding tolerance")]
    NegativeDiscrepancy(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    SizeGuard,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::UnsupportedPairing { .. } => ErrorCategory::Usage,
            Error::InstanceTooLarge { .. } => ErrorCategory::SizeGuard,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
