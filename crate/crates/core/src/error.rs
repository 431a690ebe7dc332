use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("index {index} out of range for dimension {dimension}")]
    IndexOutOfRange { index: usize, dimension: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("label at row {row} is {value}, expected -1 or +1")]
    InvalidLabel { row: usize, value: f64 },
    #[error("restricted minimizer did not converge after {iterations} iterations (gradient sup-norm {gradient:e})")]
    NotConverged { iterations: usize, gradient: f64 },
    #[error("enumerating {supports} supports exceeds the budget of {budget}")]
    BudgetExceeded { supports: u128, budget: u64 },
    #[error("sparsity level {s} invalid for dimension {d}")]
    InvalidSparsity { s: usize, d: usize },
    #[error("no restricted convexity constants available at sparsity {0}")]
    MissingLevel(usize),
    #[error("{what} violated by {excess:e}")]
    BoundViolation { what: &'static str, excess: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}
