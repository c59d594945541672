use std::io;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not positive definite: non-positive pivot at index {pivot}")]
    Singular { pivot: usize },

    #[error("training diverged at step {step}")]
    Divergence { step: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("missing data: {0}")]
    MissingData(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: placed {achieved} of {requested} points within the try budget")]
    Capacity { achieved: usize, requested: usize },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::InvalidInput(format!(
            "{what} has a non-finite entry at position {k}"
        ))),
        None => Ok(()),
    }
}
