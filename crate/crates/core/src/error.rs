use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CsiError>;

#[derive(Debug, Error)]
pub enum CsiError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("bad magic {found:?} (expected {expected:?})")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("trailing data: declared counts cover {declared} bytes but file has {actual}")]
    TrailingData { declared: u64, actual: u64 },

    #[error("non-finite value in graph {graph} at offset {offset}")]
    NonFinite { graph: usize, offset: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid shard: {0}")]
    InvalidShard(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below tolerance -{tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("matrix is not symmetric: relative asymmetry {0:e}")]
    NotSymmetric(f64),

    #[error("degenerate spectrum: trace {0:e} is not positive")]
    DegenerateSpectrum(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed summary: {0}")]
    MalformedSummary(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CsiError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CsiError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, CsiError::Io { .. })
    }
}
