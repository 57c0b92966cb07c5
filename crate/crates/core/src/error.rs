use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid correlator key {key}: {reason}")]
    InvalidKey { key: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error in {context}: {reason}")]
    Parse { context: String, reason: String },

    #[error("{what} exceeds the configured cap of {cap} (raise it with {flag})")]
    CapExceeded {
        what: String,
        cap: usize,
        flag: &'static str,
    },

    #[error("missing correlators: {0}")]
    MissingCorrelators(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
