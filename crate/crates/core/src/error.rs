use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Magnitudes are carried as `f64` regardless of the scalar type in use.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (supported: 2, 3, 4)")]
    UnsupportedDimension(usize),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("Jacobi eigenvalue iteration did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("singular design: smallest relative pivot {0:e} below floor")]
    SingularDesign(f64),

    #[error("closing element is not positive (min eigenvalue {0:e})")]
    ClosureNotPositive(f64),

    #[error("non-positive objective: det(W0) = {0:e}")]
    NonPositiveObjective(f64),

    #[error("reference state falls in an empty cluster {0:?}")]
    EmptyClusterSelection(Vec<usize>),

    #[error("grid budget exceeded: {points} candidates > {limit}")]
    BudgetExceeded { points: f64, limit: f64 },

    #[error("positivity resampling exhausted after {0} attempts")]
    ResampleExhausted(usize),

    #[error("annealing aborted: every variant skipped for {0} consecutive steps")]
    AnnealAborted(usize),

    #[error("invalid outcome probabilities for state {member}: {detail}")]
    InvalidProbabilities { member: usize, detail: String },

    #[error("state trace is {0}, expected 1")]
    TraceViolation(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
