use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}:{line}: {message}", path.display())]
    ParseFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("document {document}: {message}")]
    Corpus { document: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("undefined metric: {0}")]
    Undefined(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file name to a line-level parse error.
    pub fn in_file(self, path: &std::path::Path) -> Self {
        match self {
            Error::Parse { line, message } => Error::ParseFile {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        }
    }
}
