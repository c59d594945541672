use sntk_core::Error;

/// Failure classes with stable process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at step {0}")]
    Divergence(usize),
    #[error("verification failed: {0}")]
    Verdict(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Verdict(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::Format { .. } | Error::Parse { .. } => CliError::Io(e.to_string()),
            Error::Divergence { step } => CliError::Divergence(step),
            Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::Domain(_)
            | Error::Capacity { .. }
            | Error::MissingData(_) => CliError::Config(e.to_string()),
            Error::Singular { .. } | Error::Internal(_) => CliError::Verdict(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
