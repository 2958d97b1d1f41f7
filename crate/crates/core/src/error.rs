use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the domain of an operation (non-finite input, Δx ≥ 1, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    /// Structural problem with a file: bad header, truncated artifact, bad magic.
    #[error("format error: {0}")]
    Format(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("unsupported artifact format version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("numeric error at {step}: {message}")]
    Numeric { step: String, message: String },

    #[error("training failed: {0}")]
    Training(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 1 = configuration, 2 = data, 3 = training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Domain(_)
            | Error::Format(_)
            | Error::Row { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Io { .. } => 2,
            Error::Numeric { .. } | Error::Training(_) => 3,
        }
    }
}
