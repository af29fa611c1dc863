//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violated an operation precondition (empty text, length
    /// mismatch, out-of-domain argument).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric parameter was outside its allowed range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Configuration (mapping table, templates, backend selection) failed
    /// validation at load time.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Caller violated an API contract (e.g. learner fields supplied for a
    /// contextual prompt).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A learner-state file could not be parsed; `line` is 1-based.
    #[error("corrupt store at line {line}: {message}")]
    CorruptStore { line: usize, message: String },

    /// An interaction arrived with a timestamp not after the learner's last
    /// recorded update; the store is left unchanged.
    #[error("stale event for learner {learner_id}: timestamp {timestamp} is not after {last_updated}")]
    StaleEvent {
        learner_id: String,
        timestamp: i64,
        last_updated: i64,
    },

    /// A learner was required to exist in the store but does not.
    #[error("no stored state for learner {0}")]
    MissingState(String),

    /// Persona assignment was requested for a learner with no history.
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    /// A statistic is undefined for the given sample.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// A generation or embedding backend failed.
    #[error("backend error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Backend {
        status: Option<u16>,
        message: String,
    },

    /// One or more items of a batch failed; successes are preserved.
    #[error("{0}")]
    Batch(#[from] crate::generation::BatchError),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 backend,
    /// 5 degenerate statistics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidParameter(_) | Error::ContractViolation(_) => {
                2
            }
            Error::InvalidInput(_)
            | Error::CorruptStore { .. }
            | Error::StaleEvent { .. }
            | Error::MissingState(_)
            | Error::InsufficientHistory(_)
            | Error::Parse { .. }
            | Error::Io(_) => 3,
            Error::Backend { .. } | Error::Batch(_) => 4,
            Error::DegenerateSample(_) => 5,
        }
    }
}
