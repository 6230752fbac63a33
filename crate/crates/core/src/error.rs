use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed data file. `offset` is the byte offset into the payload when
    /// the problem can be pinned to one.
    #[error("format error in {}: {message}{}", path.display(), offset.map(|o| format!(" (at byte offset {o})")).unwrap_or_default())]
    Format {
        path: PathBuf,
        offset: Option<u64>,
        message: String,
    },

    #[error(
        "infeasible WNG floor: gamma = {gamma:.6e} exceeds the maximum attainable {gamma_max:.6e}"
    )]
    Infeasible { gamma: f64, gamma_max: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("bin {bin}: {source}")]
    AtBin {
        bin: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        offset: Option<u64>,
        msg: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, looking through per-bin wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtBin { source, .. } => source.root(),
            e => e,
        }
    }
}
