use thiserror::Error;

/// Errors raised across the pipeline.
///
/// Warnings (decay exponents at the edge of the admissible range, coarse grids)
/// are not errors; they travel in the respective reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("field is not integrable: declared decay exponent {0} must exceed 1")]
    NonIntegrableField(f64),

    #[error("quadrature did not reach the requested precision: {0}")]
    Precision(String),

    #[error("operation requires a {expected} field, got {found}")]
    WrongBacking {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid field data: {0}")]
    InvalidField(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("Gram matrix is numerically singular (condition number {0:.3e})")]
    IllConditionedBasis(f64),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("gamma-function pole at t = {0}")]
    Pole(f64),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("factorization of (P - lambda) failed at lambda = {lambda:e}; try lambda = {suggested:e}")]
    Shift { lambda: f64, suggested: f64 },

    #[error("fit rejected: {model} relative residual {residual:.3e} exceeds {threshold:.3e}")]
    FitRejected {
        model: &'static str,
        residual: f64,
        threshold: f64,
    },

    #[error("block A22 is not invertible (condition number {0:.3e})")]
    NotInvertible(f64),

    #[error("no sign change on bracket: g({lo:e}) = {g_lo:e}, g({hi:e}) = {g_hi:e}")]
    Bracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("eigenvalue curve is not monotone in lambda: {0}")]
    NonMonotone(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("operator too large: estimated {bytes} bytes exceeds the limit; try N = {suggested_n}")]
    Size { bytes: usize, suggested_n: usize },

    #[error("eigensolver did not converge after {iterations} iterations: {hint}")]
    Iteration { iterations: usize, hint: String },

    #[error("matrix factorization broke down: {0}")]
    Factorization(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
