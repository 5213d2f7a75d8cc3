use thiserror::Error;

/// Numerical failures raised by the physics modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is numerically defective (reconstruction residual {residual:.3e}, cond(P) {cond:.3e})")]
    Defective { residual: f64, cond: f64 },

    #[error(
        "propagator overflow: |exp(-i lambda t)| = {magnitude:.3e} exceeds ceiling {ceiling:.3e}"
    )]
    Overflow { magnitude: f64, ceiling: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("Q metric is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("states are nearly orthogonal: |overlap| {overlap:.3e} below floor {floor:.3e}")]
    NearOrthogonal { overlap: f64, floor: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("insufficient data: {usable} usable points, need at least {required}")]
    InsufficientData { usable: usize, required: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("trajectory blew up at step {step} (|state| = {magnitude:.3e})")]
    Blowup { step: usize, magnitude: f64 },

    #[error("no restart improved on its initial simplex")]
    NoImprovement,
}

pub type Result<T> = std::result::Result<T, Error>;
