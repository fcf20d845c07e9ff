use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("weighted average is undefined before any step has been taken (Z_k = 0)")]
    UndefinedAverage,

    #[error("solver diverged at round {round}: {reason}")]
    Diverged { round: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("fdma rate threshold infeasible: {0}")]
    Infeasible(String),

    #[error("bound evaluation unavailable: {0}")]
    BoundsUnavailable(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("unknown scenario `{name}`; valid scenarios: {valid}")]
    UnknownScenario { name: String, valid: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
