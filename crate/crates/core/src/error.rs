use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unrecognized file format: {0}")]
    Format(String),

    #[error("corrupt file: {0}")]
    Corruption(String),

    #[error("unsupported version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("degenerate direction pair: |wi + wo| = {0:e}")]
    DegeneratePair(f64),

    #[error("reconstructed direction leaves the upper hemisphere (wi.z = {wi_z}, wo.z = {wo_z})")]
    OutOfHemisphere { wi_z: f64, wo_z: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
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

    /// Process exit code used by the `btf` front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Configuration(_) => 2,
            Error::Format(_) | Error::Corruption(_) | Error::Version { .. } | Error::Io { .. } => 3,
            Error::DegeneratePair(_) | Error::OutOfHemisphere { .. } | Error::Numeric(_) => 4,
        }
    }
}
