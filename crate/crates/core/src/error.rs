use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integer overflow in exact arithmetic")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cannot parse `{0}` as an element of Q(sqrt2)")]
    Parse(String),
    #[error("substitution matrix is not primitive")]
    NonPrimitive,
    #[error("map with scale {0} is not a contraction")]
    NotContracting(f64),
    #[error("no convergence after {0} iterations")]
    IterationBudget(usize),
    #[error("window estimate is empty: the patch is not a restriction of a hull element")]
    EmptyIntersection,
    #[error("internal coordinate {0} lies outside the deformation domain")]
    OutsideDomain(f64),
    #[error("wave number {0} is not in the dual module")]
    NotInDual(String),
    #[error("{points} points exceed the autocorrelation cap of {cap}")]
    TooManyPoints { points: usize, cap: usize },
}

impl Error {
    /// Numeric failures (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Overflow | Error::DivisionByZero | Error::IterationBudget(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
