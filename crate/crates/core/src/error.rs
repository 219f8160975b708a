use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A search-space or run configuration is invalid. `dimension` names the
    /// offending key so callers can report it verbatim.
    #[error("invalid configuration for `{dimension}`: {message}")]
    Config { dimension: String, message: String },

    #[error("dataset error: {0}")]
    Data(String),

    #[error("{stage}: {message}")]
    Stage { stage: String, message: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("run `{0}` already exists (pass overwrite to replace it)")]
    RunExists(String),

    #[error("unknown run id `{0}`")]
    UnknownRun(String),

    #[error("malformed record {path}: {message}")]
    MalformedRecord { path: PathBuf, message: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(dimension: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            dimension: dimension.into(),
            message: message.into(),
        }
    }

    pub fn stage(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
