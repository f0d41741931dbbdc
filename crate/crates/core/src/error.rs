use thiserror::Error;

/// Errors raised by the samplers, the parameterization and the data loaders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (factorization failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("diagonal entry {index} of the triangular factor is degenerate ({value:e})")]
    DegenerateDiagonal { index: usize, value: f64 },

    #[error("entry ({i}, {j}) is {value:e} but the graph has no such edge")]
    ConeViolation { i: usize, j: usize, value: f64 },

    #[error("no prior normalizing constant available for graph {0}")]
    MissingPriorConstant(String),

    #[error("non-finite value in input data at row {row}, column {col}")]
    NonFiniteData { row: usize, col: usize },

    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },

    #[error("truncated Poisson imputation failed: {0}")]
    Imputation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
