use std::path::PathBuf;

use crate::label::EventLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("event position {position_m} m lies outside the fiber [0, {length_m}] m")]
    EventPosition { position_m: f64, length_m: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("input too short: {what} needs at least {required} samples, got {actual}")]
    TooShort {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("class {class} has {available} samples, {required} required")]
    InsufficientSamples {
        class: EventLabel,
        available: usize,
        required: usize,
    },

    #[error("training data must contain at least two classes")]
    SingleClass,

    #[error("training diverged (non-finite loss at epoch {epoch}); try a smaller step size")]
    Diverged { epoch: usize },

    #[error("{count} unseen sample ids also appear in training (first: {first})")]
    Leakage { count: usize, first: String },

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied configuration rather than by
    /// the run itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::UnknownStrategy { .. } | Error::InvalidParameter { .. }
        )
    }
}
