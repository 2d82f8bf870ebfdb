use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed {what}: {message}")]
    Format { what: String, message: String },

    #[error("schema version mismatch in {path}: expected {expected}, found {found}")]
    SchemaMismatch {
        path: PathBuf,
        expected: u32,
        found: String,
    },

    #[error("weights file not found: {0}")]
    MissingWeights(PathBuf),

    #[error("{path}: {source}")]
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

    pub(crate) fn format(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            message: message.into(),
        }
    }

    /// Usage/config class errors map to exit code 1, everything else to 2.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidParameter(_) | Error::MissingWeights(_)
        )
    }

    /// Short machine-readable tag used on stderr.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "parameter",
            Error::Contract(_) => "contract",
            Error::Fit(_) => "fit",
            Error::EmptyDataset(_) => "empty-dataset",
            Error::Config { .. } => "config",
            Error::Format { .. } => "format",
            Error::SchemaMismatch { .. } => "schema",
            Error::MissingWeights(_) => "missing-weights",
            Error::Io { .. } => "io",
        }
    }
}
