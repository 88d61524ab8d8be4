use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("singular nodal system at {location}")]
    Singular { location: String },

    #[error("quality error: {0}")]
    Quality(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("series error: {0}")]
    Series(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("comparison error: {0}")]
    Compare(String),

    #[error("simulation aborted at step {step}: {source}; state: {state}")]
    Simulation {
        step: usize,
        state: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable, machine-greppable identifier for each failure class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config { .. } => "E_CONFIG",
            Error::Singular { .. } => "E_SOLVER",
            Error::Quality(_) => "E_QUALITY",
            Error::Fit(_) => "E_FIT",
            Error::Series(_) => "E_SERIES",
            Error::Range(_) => "E_RANGE",
            Error::Parse { .. } => "E_PARSE",
            Error::Format(_) => "E_FORMAT",
            Error::Compare(_) => "E_COMPARE",
            Error::Simulation { source, .. } => source.code(),
            Error::Io { .. } => "E_IO",
        }
    }
}
