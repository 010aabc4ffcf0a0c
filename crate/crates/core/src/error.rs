use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no parseable rows")]
    NoRows,

    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(String),

    #[error("cadence error: {0}")]
    Cadence(String),

    #[error("missing data within the first three weeks (slot {slot})")]
    MissingInWarmup { slot: usize },

    #[error("no donor value available for missing slot {slot}")]
    NoDonor { slot: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty reference set for query {query}")]
    EmptyReference { query: usize },

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("least-squares solve failed: {0}")]
    Solve(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }
}
