use thiserror::Error;

use crate::limit_state::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max deviation {max_deviation:e})")]
    Asymmetric { max_deviation: f64 },

    #[error("matrix is not positive definite (non-positive pivot at index {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("near-singular covariance: {0}")]
    NearSingular(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Evaluation(#[from] EvalError),

    #[error("zero gradient in standard space at iteration {iteration}")]
    ZeroGradient { iteration: usize },

    #[error("degenerate problem: {0}")]
    DegenerateProblem(String),

    #[error("numerical degeneracy in row {row}: conditional covariance has condition number {condition:e}")]
    NumericalDegeneracy { row: usize, condition: f64 },

    #[error("limit-state evaluation failed at sample {index}: {source}")]
    SampleEvaluation { index: u64, source: EvalError },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    /// True for failures caused by the numerics of a well-formed problem
    /// (factorization, convergence, conditioning) rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NearSingular(_)
                | Error::Evaluation(_)
                | Error::ZeroGradient { .. }
                | Error::DegenerateProblem(_)
                | Error::NumericalDegeneracy { .. }
                | Error::SampleEvaluation { .. }
        )
    }
}
