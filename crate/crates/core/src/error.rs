use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid ellipsoid: {0}")]
    InvalidEllipsoid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("failed to bracket the root within {0} doublings")]
    BracketFailure(usize),

    #[error("bisection stopped with relative residual {0:e} above tolerance")]
    NoConvergence(f64),
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}
