use thiserror::Error;

/// Errors reported by the solvers and the model layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// An ordered-case solver was called on an instance that does not satisfy
    /// its ordering precondition.
    #[error("ordering precondition violated: {0}")]
    Ordering(String),

    #[error("budget {budget} is below the full-sampling budget {threshold}")]
    BelowFullSamplingBudget { budget: f64, threshold: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("grid of {points:e} evaluations exceeds the limit of {limit:e}")]
    GridTooLarge { points: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
