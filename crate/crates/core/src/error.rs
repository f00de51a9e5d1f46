use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

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
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    /// Malformed or unsuitable input data.
    #[error("data error: {0}")]
    Data(String),
    /// A column the caller referenced does not exist.
    #[error("missing column `{0}`")]
    MissingColumn(String),
    /// Invalid arguments, hyperparameters or configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error("unsupported artifact format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    /// Fitting or evaluation failed at runtime.
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 1,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Data(_)
            | Error::MissingColumn(_)
            | Error::Artifact(_)
            | Error::UnsupportedVersion { .. } => 2,
            Error::Runtime(_) => 3,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}
