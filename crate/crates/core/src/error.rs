use thiserror::Error;

/// Errors raised by the calculus engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("multi-index length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("multi-index subtraction would go negative")]
    NegativeIndex,
    #[error("backend mismatch: {0}")]
    BackendMismatch(String),
    #[error("domain mismatch")]
    DomainMismatch,
    #[error("formal degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("truncation insufficient: need {needed}, have {have}")]
    Truncation { needed: u32, have: u32 },
    #[error("open set is not contained in the target set")]
    NotSubset,
    #[error("support escapes the domain: {0}")]
    SupportEscapes(String),
    #[error("x-derivatives are not available on a discrete base")]
    XDerivativeOnDiscrete,
    #[error("point {0} is not in the domain")]
    PointNotInDomain(String),
    #[error("invalid bump breakpoints: need a < b <= c < d")]
    InvalidBump,
    #[error("quadrature did not converge after {evaluations} evaluations (error estimate {estimate:e})")]
    Quadrature { evaluations: usize, estimate: f64 },
    #[error("positivity certificate failed: {0}")]
    Certificate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("E dimension mismatch: {0} vs {1}")]
    ValueDimMismatch(usize, usize),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("incompatible local sections {first} and {second}: {detail}")]
    Incompatible {
        first: usize,
        second: usize,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
