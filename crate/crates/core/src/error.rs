use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    #[error("no sign change of the root function on [{lo}, {hi}]")]
    RootNotBracketed { lo: f64, hi: f64 },

    #[error("undefined difference: both arguments of T_k are zero")]
    UndefinedDifference,

    #[error("division by zero while evaluating {0}")]
    DivisionByZero(&'static str),

    #[error("multiplier ({i}, {j}) lies outside the admissible sparsity pattern")]
    PatternViolation { i: usize, j: usize },

    #[error("flow constraint violated (max residual {residual:e})")]
    FlowViolation { residual: f64 },

    #[error("conversion matrix M is singular at row {index}")]
    SingularM { index: usize },

    #[error("stepsize is not optimal for these parameters (|T_N| = {residual:e})")]
    NotAtOptimalStepsize { residual: f64 },

    #[error("star equations of the dual map are inconsistent (residual {residual:e})")]
    InconsistentSystem { residual: f64 },

    #[error("psi is undefined at t = {t}")]
    Domain { t: f64 },

    #[error("internal invariant broken: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CertError>;
