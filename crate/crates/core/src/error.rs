use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the module that raises them. [`Error::is_encoder_failure`]
/// separates transport/encoder problems from data and configuration problems,
/// which the command-line front end maps onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // vecmath
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero vector: norm below 1e-12")]
    ZeroVector,
    #[error("empty matrix: {0}")]
    EmptyMatrix(&'static str),
    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate})")]
    NoConvergence { iterations: usize, last_estimate: f64 },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    // keyword
    #[error("empty input")]
    EmptyInput,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("token index {index} out of range for sentence of {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },

    // encoder
    #[error("no stored embedding for text with hash {hash}")]
    MissingEmbedding { hash: String },
    #[error("remote encoder unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("encoder returned dimension {got}, expected {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("cache file line {line}: {reason}")]
    CacheFormat { line: usize, reason: String },
    #[error("bad encoder spec {spec:?}: {reason}")]
    BadEncoderSpec { spec: String, reason: String },

    // eval
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("dataset has {0} pair(s); at least 2 are required")]
    TooFewPairs(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate ranking: all values identical")]
    DegenerateRanking,
    #[error("bad grid spec {spec:?}: {reason}")]
    BadGridSpec { spec: String, reason: String },

    // diagnose
    #[error("sentence has {len} token(s); at least {required} are required")]
    SentenceTooShort { len: usize, required: usize },
    #[error("no eligible pairs ({skipped} skipped)")]
    NoEligiblePairs { skipped: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures caused by the encoder backend or its transport.
    pub fn is_encoder_failure(&self) -> bool {
        matches!(
            self,
            Error::RemoteUnavailable(_) | Error::DimMismatch { .. } | Error::MissingEmbedding { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
