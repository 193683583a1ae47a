use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected d={expected}, found d={found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("size mismatch: clouds have {left} and {right} points")]
    SizeMismatch { left: usize, right: usize },

    #[error("size limit exceeded: {size} > {limit}")]
    SizeLimitExceeded { size: usize, limit: usize },

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    #[error("plan row {row} underflowed to zero (mirror step too large?)")]
    DegenerateRow { row: usize },

    #[error("reweighting failed at iteration {iteration}: plan row {row} degenerate")]
    DegenerateRowAt { iteration: usize, row: usize },

    #[error("snapshot sink failed: {0}")]
    Sink(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
