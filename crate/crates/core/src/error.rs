use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the trace classification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trace {0} contains no system calls")]
    EmptyTrace(String),

    #[error("no n-grams in range ({n_min}, {n_max}) could be extracted from the corpus")]
    EmptyVocabulary { n_min: usize, n_max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("ROC curve requires both classes to be present")]
    SingleClass,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {field}: {reason}")]
    ConfigInvalid { field: &'static str, reason: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("grid cell (alpha={alpha}, tol={tol}): {source}")]
    GridCell {
        alpha: f64,
        tol: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u64 },

    #[error("model parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field,
            reason: reason.into(),
        }
    }
}
