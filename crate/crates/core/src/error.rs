//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum GhmError {
    /// Invalid configuration or precondition violation detected before any work.
    #[error("config error: {0}")]
    Config(String),

    /// Tensor/grid dimension mismatch.
    #[error("shape error: {0}")]
    Shape(String),

    /// Numerical failure (solver divergence, NaN loss, unstable stepping).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed or inconsistent GHM1 container.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GhmError>;

impl GhmError {
    /// Process exit code for the CLI: 2 for config errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            GhmError::Config(_) | GhmError::Shape(_) | GhmError::Format(_) => 2,
            GhmError::Numeric(_) => 3,
            GhmError::Io(_) => 3,
        }
    }
}
