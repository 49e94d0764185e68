use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FlccError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FlccError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("numerical divergence: {0}")]
    NumericalDivergence(String),

    #[error("no participants in round")]
    NoParticipants,

    #[error("{path}: malformed field `{field}`: {reason}")]
    Format {
        path: PathBuf,
        field: &'static str,
        reason: String,
    },

    #[error("insufficient data: need {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("config line {line}: `{key}`: {reason}")]
    Config {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("{path}: {reason}")]
    RunInput { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FlccError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        FlccError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FlccError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line driver.
    ///
    /// 2 = configuration, 3 = data, 4 = runtime or numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            FlccError::Config { .. } | FlccError::InvalidParameter { .. } => 2,
            FlccError::Format { .. }
            | FlccError::InsufficientData { .. }
            | FlccError::RunInput { .. }
            | FlccError::Io { .. } => 3,
            FlccError::InvalidInput(_)
            | FlccError::InvalidLayout(_)
            | FlccError::NumericalDivergence(_)
            | FlccError::NoParticipants => 4,
        }
    }
}
