//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state blew up (non-finite) at step {step}")]
    BlowUp { step: usize },

    #[error("autonomous run diverged at step {step} (|u| = {norm:.3e} exceeds guard {guard:.3e})")]
    Divergence { step: usize, norm: f64, guard: f64 },

    #[error("series too short: need at least {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("delay {delta_tau} is not an integer multiple of dt {dt} (remainder {remainder:.3e})")]
    DelayNotMultiple {
        delta_tau: f64,
        dt: f64,
        remainder: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("point rejected: drift delta {delta:.3e} >= eps0 {eps0:.3e}")]
    NotAFixedPoint { delta: f64, eps0: f64 },

    #[error("ill-conditioned triangular factor (condition {cond:.3e}); reduce the renormalization interval")]
    IllConditioned { cond: f64 },

    #[error("histogram grids do not match")]
    GridMismatch,

    #[error("malformed data: {0}")]
    Format(String),

    #[error("model bundle: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
