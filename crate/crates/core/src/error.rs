use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("symbol {index} of X has zero marginal probability")]
    DegenerateSupport { index: usize },
    #[error("q({index}) = {q} > 0 but p({index}) = 0")]
    AbsoluteContinuity { index: usize, q: f64 },
    #[error("triple (u={u}, x={x}, y={y}) lies outside the support of q")]
    OffSupport { u: usize, x: usize, y: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("enumeration needs {candidates} candidate pairs, limit is {limit}; use sampled mode")]
    BudgetExceeded { candidates: f64, limit: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
