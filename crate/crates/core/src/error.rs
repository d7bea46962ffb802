use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown method tag `{0}`")]
    UnknownMethod(String),

    #[error("invalid sweep name `{0}` (expected density, directionality, width or mixture)")]
    InvalidSweep(String),

    #[error("unknown condition `{0}`")]
    UnknownCondition(String),

    #[error("scenario generation failed for {condition}: {reason}")]
    ScenarioGeneration { condition: String, reason: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::UnknownMethod(_)
            | Error::InvalidSweep(_)
            | Error::UnknownCondition(_) => 1,
            Error::Io { .. } | Error::Corrupt { .. } => 2,
            Error::ScenarioGeneration { .. } | Error::Invariant(_) => 3,
        }
    }
}
