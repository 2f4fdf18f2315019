use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the radio map toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("query ({x}, {y}) lies outside the grid extent")]
    OutOfBounds { x: f64, y: f64 },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("no usable measurements: {0}")]
    EmptyMeasurements(String),

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error("malformed raster: {0}")]
    Raster(String),

    #[error("malformed tile: {0}")]
    Tile(String),

    #[error("unknown transmitter id {0}")]
    UnknownTransmitter(u32),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::UnknownTransmitter(_) => {
                ErrorKind::Config
            }
            Error::Conditioning(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;
