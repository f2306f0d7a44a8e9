use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Hilbert space: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("qubit site {site} out of range for {n_qubits} qubit(s)")]
    SiteOutOfRange { site: usize, n_qubits: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("Krylov propagation did not converge (residual {residual:.3e})")]
    KrylovBreakdown { residual: f64 },

    #[error("step size underflow at t = {time:.6e} (h = {step:.3e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("trace drift {drift:.3e} exceeds tolerance {tolerance:.3e} at t = {time:.6e}")]
    TraceDrift { drift: f64, tolerance: f64, time: f64 },

    #[error("eigensolver did not converge (residual {residual:.3e})")]
    EigenConvergence { residual: f64 },

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("resource budget exceeded: {0}")]
    Budget(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trace comparison error: {0}")]
    Compare(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
