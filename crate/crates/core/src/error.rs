use std::io;

use thiserror::Error;

/// Problems decoding an FSCT tensor stream.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"FSCT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported tensor rank {0}")]
    UnsupportedRank(u8),
    #[error("truncated stream: {0}")]
    Truncated(&'static str),
    #[error("zero-sized dimension in header")]
    EmptyDimension,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("tensor format: {0}")]
    Format(#[from] FormatError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("layer {layer}: {message}")]
    Layer { layer: usize, message: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Diverged(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Whether the failure came from the filesystem or a byte stream.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
