//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The averaging-form step size would become non-positive at `step`.
    #[error("degenerate schedule at step {step}: eta ({eta}) <= alpha ({alpha}) forces the next eta below zero")]
    DegenerateSchedule { step: usize, eta: f64, alpha: f64 },

    /// A zero momentum coefficient makes the averaging-form recurrence divide by zero.
    #[error("momentum coefficient is zero at step {step}; the averaging-form step size is undefined there")]
    DivisionDegeneracy { step: usize },

    #[error("unsupported capability: {0}")]
    UnsupportedCapability(String),

    #[error("schedule construction failed: {0}")]
    ScheduleConstruction(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::UnsupportedCapability(msg.into())
    }
}
