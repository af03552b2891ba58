use thiserror::Error;

use crate::signal::ComplexSignal;

#[derive(Debug, Error)]
pub enum SprError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("capacity exceeded: requested {requested} entries from a vector of length {available}")]
    Capacity { requested: usize, available: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("reference signal has zero norm")]
    DegenerateReference,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value encountered at iteration {iteration}")]
    NumericFailure {
        iteration: usize,
        last_finite: ComplexSignal,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SprError>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SprError::Dimension { expected, found })
    }
}
