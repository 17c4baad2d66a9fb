use qtraj_core::CoreError;
use thiserror::Error;

pub type Result<T, E = FinslerError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FinslerError {
    #[error("y0 must be positive, got {0}")]
    NonPositiveY0(f64),

    #[error("|q̇| = {speed:.3e} is below v_min = {v_min:.1e}")]
    SlowVelocity { speed: f64, v_min: f64 },

    #[error("degenerate metric (det {det:.3e} against scale {scale:.3e})")]
    DegenerateMetric { det: f64, scale: f64 },

    #[error("the Q oracle does not provide second derivatives")]
    MissingSecondDerivatives,

    #[error("point t = {t}, q = {q:?} lies outside the oracle domain")]
    OutOfDomain { t: f64, q: Vec<f64> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("geodesic step rejected after {halvings} halvings: {reason}")]
    StepRejected { halvings: usize, reason: String },

    #[error(transparent)]
    Core(#[from] CoreError),
}
