use thiserror::Error;

/// Errors raised by the library. Solver non-convergence is not an error:
/// it is reported in-band through [`crate::eigensolver::EigResult::residual`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("signal length {actual} does not match the expected length {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("dense eigensolver cap exceeded: p = {p} > {cap}")]
    DenseCapExceeded { p: usize, cap: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
