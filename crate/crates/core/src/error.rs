use thiserror::Error;

/// Failures raised by the numerical kernels and selection procedures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("design matrix is singular: column {column} is collinear with earlier columns")]
    SingularDesign { column: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("e-BH selection disagrees with the top-{s_bar} rank set ({ebh} vs {top} features)")]
    LemmaViolation { s_bar: usize, ebh: usize, top: usize },

    #[error("need at least two selection sets, got {0}")]
    TooFewSets(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
