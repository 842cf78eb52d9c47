use thiserror::Error;

/// Failures raised by loop arithmetic, factorizations and frame pipelines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LoopError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("loop is not invertible on the window (residual {residual:.3e})")]
    SingularLoop { residual: f64 },

    #[error("cannot evaluate a loop at lambda = 0")]
    ZeroLambda,

    #[error("loop is off the big cell or the window is too small (condition {condition:.3e}, residual {residual:.3e})")]
    BigCellViolation { condition: f64, residual: f64 },

    #[error("no constant solution in the real form: {reason}")]
    NotInIwasawaCell { reason: String },

    #[error("Maurer-Cartan equation fails in degree {degree} ({block}): residual {residual:.3e}")]
    IntegrabilityViolation {
        degree: i32,
        block: String,
        residual: f64,
    },

    #[error("frame is not real at the requested lambda (imaginary residual {residual:.3e})")]
    NonRealFrame { residual: f64 },

    #[error("lambda = +-i makes the curvature formula degenerate")]
    DegenerateLambda,

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, LoopError>;
