//! Error types shared across the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes incompatible for an operation.
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// An operation was called in a way its contract forbids.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A sequence operation received zero timesteps.
    #[error("empty sequence: {0}")]
    EmptySequence(&'static str),

    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Bad configuration value or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input data (labels, alignment, duplicate ids).
    #[error("data error: {0}")]
    Data(String),

    /// Prediction sets that should cover the same samples do not.
    #[error("alignment error: {msg}; offending ids: {ids:?}")]
    Alignment { msg: String, ids: Vec<String> },

    /// Text parse failure with a 1-based line number.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Checkpoint file does not start with the expected magic bytes.
    #[error("checkpoint error: bad magic bytes (not a checkpoint file)")]
    BadMagic,

    /// Checkpoint was written by an incompatible format version.
    #[error("checkpoint error: format version {found} (supported: {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    /// Checkpoint payload shorter than its manifest promises.
    #[error("checkpoint error: truncated payload ({actual} bytes, need {expected})")]
    TruncatedPayload { expected: usize, actual: usize },

    /// Checkpoint manifest disagrees with itself or the stored config.
    #[error("checkpoint error: manifest inconsistency: {0}")]
    ManifestError(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::DimensionMismatch {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}
