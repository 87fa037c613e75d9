use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum VqtError {
    /// Invalid physical or circuit configuration (bad sizes, ranges, flags).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A size cap was exceeded (dense matrices, oracle dimensions).
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// A state or density matrix violated positivity/normalization bounds.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Numerical failure: NaN/Inf objective, eigensolver stall, count mismatch.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, VqtError>;
