use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("ingestion error in {file:?} at byte offset {offset}: {reason}")]
    Ingestion {
        file: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("invalid partition spec: {0}")]
    Spec(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("privacy error: {0}")]
    Privacy(String),

    #[error("share policy violated by client {client}: {reason}")]
    Policy { client: usize, reason: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error in {file:?}: {reason}")]
    Format { file: PathBuf, reason: String },

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse error families, each with a distinct process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Config,
    Ingestion,
    Privacy,
    Numeric,
    Protocol,
}

impl ErrorFamily {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorFamily::Config => 2,
            ErrorFamily::Ingestion => 3,
            ErrorFamily::Privacy => 4,
            ErrorFamily::Numeric => 5,
            ErrorFamily::Protocol => 6,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(file: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            reason: reason.into(),
        }
    }

    /// Wraps the error with a human-readable context prefix, keeping its family.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn family(&self) -> ErrorFamily {
        match self {
            Error::Dimension(_) | Error::Numeric(_) | Error::Index(_) => ErrorFamily::Numeric,
            Error::Ingestion { .. } | Error::Io { .. } | Error::Format { .. } => {
                ErrorFamily::Ingestion
            }
            Error::Privacy(_) => ErrorFamily::Privacy,
            Error::Policy { .. } | Error::Protocol(_) => ErrorFamily::Protocol,
            Error::Spec(_) | Error::Unsupported(_) | Error::Domain(_) | Error::Config(_) => {
                ErrorFamily::Config
            }
            Error::Context { source, .. } => source.family(),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
