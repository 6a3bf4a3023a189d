use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hermiticity violated: max |rho - rho^dagger| = {0:.3e}")]
    NotHermitian(f64),
    #[error("trace violated: trace is {0:.12}, expected 1")]
    Trace(f64),
    #[error("positivity violated: smallest eigenvalue {0:.3e}")]
    NotPositive(f64),
    #[error("covariance symmetry violated: max |cov - cov^T| = {0:.3e}")]
    NotSymmetric(f64),
    #[error("uncertainty relation violated: smallest eigenvalue of cov + i*Omega is {0:.3e}")]
    Uncertainty(f64),
    #[error("Fock cutoff too small: tail mass {tail:.3e} exceeds tolerance {tolerance:.1e}")]
    Truncation { tail: f64, tolerance: f64 },
    #[error("quadrature grid too narrow: captured mass deficit {deficit:.3e}")]
    GridTooNarrow { deficit: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("mixture weights invalid: {0}")]
    Weights(String),
    #[error("degenerate partner quadrature: variance {0:.3e} is too small to regress on")]
    DegeneratePartner(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("state spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
