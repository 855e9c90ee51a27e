use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("tabulated kernel has no value at lag {lag}")]
    LagMismatch { lag: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("expected {expected} agents, got {got}")]
    WrongArity { expected: usize, got: usize },

    #[error("singular system: {context}")]
    Singular { context: String },

    #[error("degenerate linear kernel: {0}")]
    DegenerateKernel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("aggregate flow vanishes at t0; the implied-kernel system is singular")]
    SingularFlow,

    #[error("kernel value at lag 0 is zero; cannot scale to unit")]
    ZeroScale,

    #[error("kernel shift {shift} makes the shifted system singular")]
    DegenerateShift { shift: f64 },

    #[error("inconsistent system, least-squares residual {residual:e}")]
    Inconsistent { residual: f64 },

    #[error("no linear implied kernel: {0}")]
    NoLinearSolution(String),

    #[error("degenerate schedule: {0}")]
    DegenerateSchedule(String),

    #[error("matrix is not symmetric within {tol:e}")]
    NotSymmetric { tol: f64 },

    #[error("matrix is not positive definite: eigenvalue {eigenvalue}")]
    NotPositiveDefinite { eigenvalue: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
