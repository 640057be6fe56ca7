use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A file could not be parsed. `detail` names the offending field.
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    /// An I/O operation failed, with the path it failed on.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A caller supplied an argument outside the documented bounds.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The dataset layout or contents are unusable.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// A configuration file or flag could not be interpreted.
    #[error("config error: {0}")]
    Config(String),

    /// A model archive is missing pieces or inconsistent with the request.
    #[error("model archive error: {0}")]
    Archive(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
