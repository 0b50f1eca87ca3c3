use thiserror::Error;

/// Errors raised across the transform pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SstError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("bandlimit mismatch: signal has L = {signal}, basis has L = {basis}")]
    BandlimitMismatch { signal: usize, basis: usize },

    #[error("Slepian scale {alpha} out of range 1..={available}")]
    ScaleOutOfRange { alpha: usize, available: usize },

    #[error("transform is not invertible at degrees {degrees:?}")]
    NonInvertible { degrees: Vec<usize> },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("zero signal: {0}")]
    ZeroSignal(String),

    #[error("basis is not zonal")]
    NotZonal,

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("malformed file: {0}")]
    Format(String),
}

impl From<std::io::Error> for SstError {
    fn from(err: std::io::Error) -> Self {
        SstError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for SstError {
    fn from(err: serde_json::Error) -> Self {
        SstError::Format(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SstError>;
