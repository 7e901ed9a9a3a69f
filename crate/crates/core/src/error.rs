use thiserror::Error;

/// Errors raised by the tracking library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The Hessian could not be factorized as positive definite.
    #[error("singular or indefinite Hessian at t = {t} (smallest pivot {min_pivot:e})")]
    SingularHessian { t: f64, min_pivot: f64 },

    /// A phase-one trigger was requested with a zero Lyapunov value.
    #[error("degenerate trigger: Lyapunov value {v_k:e} must be positive")]
    DegenerateTrigger { v_k: f64 },

    /// A hold-phase trigger was requested above the target level.
    #[error("invalid phase: Lyapunov value {v_k:e} exceeds target level {epsilon:e}")]
    InvalidPhase { v_k: f64, epsilon: f64 },

    #[error("sample budget of {max_samples} exhausted at t = {t}")]
    SampleBudgetExceeded { max_samples: usize, t: f64 },

    /// A trigger returned a step that vanishes in floating point.
    #[error("step {k} at t = {t} underflowed to zero length")]
    StepUnderflow { k: usize, t: f64 },

    /// The state left the region on which the derivative bounds are certified.
    #[error("sample {k} at t = {t} left the certified region on coordinate {coord}")]
    BoundsRegionExited { k: usize, t: f64, coord: usize },

    #[error("time {t} is outside the horizon [{t0}, {tf}]")]
    OutOfHorizon { t: f64, t0: f64, tf: f64 },

    #[error("non-convexity detected: Hessian eigenvalue {min_eig:e} at t = {t}")]
    NonConvexDetected { min_eig: f64, t: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("root finder failed to bracket a sign change (last upper end {upper:e})")]
    RootNotBracketed { upper: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
