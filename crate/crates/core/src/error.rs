use thiserror::Error;

/// Errors raised by the solver, the norm machinery and the verification harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("derivative order {0} exceeds the supported maximum of 3")]
    OrderTooHigh(usize),

    #[error("non-finite integrand: {0}")]
    NonFinite(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contour height {h} lies within {guard} of a resolvent pole")]
    PoleGuard { h: f64, guard: f64 },

    #[error("resolvent evaluated at its pole {re}{im:+}i")]
    ResolventPole { re: f64, im: f64 },

    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
