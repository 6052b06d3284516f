use std::path::PathBuf;

/// Errors shared across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("sequence length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("token {token} at row {row}, position {position} is out of range for vocabulary size {k}")]
    TokenOutOfRange {
        token: u32,
        row: usize,
        position: usize,
        k: u32,
    },

    #[error("vocabulary size must be at least 2, got {0}")]
    VocabTooSmall(u32),

    #[error("dataset must contain at least one row")]
    EmptyDataset,

    #[error("sequence length must be positive")]
    EmptySequence,

    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("polynomial scheduler exponent must be positive, got {0}")]
    BadExponent(f64),

    #[error("step count must be at least 1")]
    ZeroSteps,

    #[error("subset count {subsets} must be in 1..={rows} (dataset rows)")]
    BadSubsetCount { subsets: usize, rows: usize },

    #[error("forward velocity is singular at t = 1; use the final-jump rule instead")]
    SingularTime,

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("exhaustive reference computation needs K^N * M <= {limit}, got {requested}")]
    InstanceTooLarge { requested: f64, limit: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic, expected {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("{path}: unsupported format version {version}")]
    BadVersion { path: PathBuf, version: u8 },

    #[error("{path}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch {
        path: PathBuf,
        stored: u32,
        computed: u32,
    },

    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
