use std::path::PathBuf;

use thiserror::Error;

/// Starting point of a dip fit, carried by [`Error::FitFailure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitInit {
    pub baseline: f64,
    pub visibility: f64,
    pub center_fs: f64,
    pub fwhm_fs: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectral functions live on incompatible frequency grids")]
    IncompatibleGrid,

    #[error("filters annihilate the joint spectral amplitude (norm {norm:e} before renormalization)")]
    DegenerateFilter { norm: f64 },

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("scan shows no dip (visibility estimate {visibility:.3e})")]
    NoDip { visibility: f64 },

    #[error("dip fit did not converge after {iterations} iterations (init: {init:?})")]
    FitFailure { iterations: usize, init: FitInit },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unsupported network: {0}")]
    UnsupportedNetwork(String),

    #[error("scenario not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", path.display())]
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

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the `sim` binary: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::NotFound(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
