use thiserror::Error;

/// Errors produced by problem construction, solvers and data ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("component index {index} out of range for m = {m}")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("point lies outside the feasible set")]
    Infeasible,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("all Lipschitz constants are zero")]
    ZeroLipschitz,

    #[error("unsupported prox combination: regularizer {regularizer} with {feasible} feasible set")]
    UnsupportedProx {
        regularizer: &'static str,
        feasible: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("regime mismatch: expected {expected}, found {found}")]
    RegimeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("component count {m} too large to enumerate (limit {limit})")]
    EnumerationTooLarge { m: usize, limit: usize },

    #[error("oracle exhausted {iterations} iterations before reaching tolerance")]
    OracleBudgetExhausted { iterations: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no rows")]
    NoRows,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
