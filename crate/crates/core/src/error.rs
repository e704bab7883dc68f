use thiserror::Error;

/// Errors raised by the recovery library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column {0} has zero norm")]
    ZeroColumn(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("linear system is numerically singular (condition estimate {0:.3e})")]
    SingularSystem(f64),
    #[error("sparsity budget {budget} exceeds available length {len}")]
    BudgetTooLarge { budget: usize, len: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("index sets overlap at index {0}")]
    OverlappingSets(usize),
    #[error("index set is empty")]
    EmptySet,
    #[error("restricted coherence of a set with itself needs at least two indices")]
    SingletonSelf,
    #[error("within-set contraction rho = {0} is not below 1")]
    RhoNotContractive(f64),
    #[error("refinement factor alpha = {0} must satisfy 1 < alpha <= 2")]
    BadAlpha(f64),
    #[error("{regions} regions need at least that many sources, got k = {k}")]
    TooFewSources { k: usize, regions: usize },
    #[error("thresholding eliminated every candidate set")]
    AllSetsEliminated,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
