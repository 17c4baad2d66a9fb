use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid has {points} points, above the budget of {budget}")]
    BudgetExceeded { points: usize, budget: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {point:?} lies outside the box")]
    OutOfBox { point: Vec<f64> },

    #[error("non-finite value detected at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("linear solve did not reach tolerance {tol:e} (residual {residual:e})")]
    SolverNonConvergence { residual: f64, tol: f64 },

    #[error("relaxation did not converge after {iterations} iterations (last energy change {delta:e})")]
    RelaxationNonConvergence { iterations: usize, delta: f64 },

    #[error("field amplitude is below the node threshold everywhere")]
    AllNodes,

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("observer failed at step {step}: {message}")]
    Observer { step: usize, message: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
