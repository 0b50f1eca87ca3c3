use sst_core::SstError;
use thiserror::Error;

/// Failures surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] SstError),
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Core(SstError::Io(err.to_string()))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Core(SstError::Format(err.to_string()))
    }
}

impl CliError {
    /// Process exit code: 2 usage, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                SstError::Domain(_)
                | SstError::GridMismatch(_)
                | SstError::BandlimitMismatch { .. }
                | SstError::ScaleOutOfRange { .. }
                | SstError::NotZonal
                | SstError::InvalidRegion(_) => 2,
                SstError::NonInvertible { .. }
                | SstError::Numerical(_)
                | SstError::ZeroSignal(_) => 3,
                SstError::Io(_) | SstError::Format(_) => 4,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
