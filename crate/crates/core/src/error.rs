//! Error type shared by all toolkit modules.

use std::path::PathBuf;

/// Errors produced by toolkit operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected \"CTK1\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported CTK version {0}")]
    BadVersion(u32),

    #[error("unknown dtype code {0}")]
    BadDtype(u8),

    #[error("truncated payload: expected {expected} bytes total, file ends at byte {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("non-finite value at byte offset {offset}")]
    NonFinite { offset: u64 },

    #[error("label {label} exceeds dtype range (max {max})")]
    LabelRange { label: u32, max: u32 },

    #[error("dims mismatch: {a:?} vs {b:?}")]
    DimsMismatch {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("SIRT diverged: residual grew for 3 consecutive iterations at relaxation {omega}")]
    SirtDiverged { omega: f64 },

    #[error("external enhancer failed: {0}")]
    External(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
