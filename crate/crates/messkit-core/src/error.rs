use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),
    #[error("frequency {omega} outside tabulated range [{lo}, {hi}]")]
    OutOfDomain { omega: f64, lo: f64, hi: f64 },
    #[error("accuracy estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    Accuracy { estimate: f64, tol: f64 },
    #[error("ill-conditioned: {0}")]
    Conditioning(String),
    #[error("decomposition failed: {0}")]
    Decomposition(String),
    #[error("structural precondition violated: {0}")]
    Structural(String),
    #[error("pole proximity at omega = {omega}")]
    PoleProximity { omega: f64 },
    #[error("numerical instability: {0}")]
    Instability(String),
    #[error("extended dimension {dim} exceeds limit {limit}; reduce cutoffs (e.g. to {hint:?})")]
    DimensionGuard {
        dim: usize,
        limit: usize,
        hint: Vec<usize>,
    },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("integrator: {0}")]
    Integrator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
