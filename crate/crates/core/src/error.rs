use thiserror::Error;

/// Errors raised across the lab.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("degenerate profile: psi = {psi:.3e} at cell {cell} is below the positivity floor {floor:.3e}")]
    DegenerateProfile { cell: usize, psi: f64, floor: f64 },

    #[error("slice x = {x} is outside the interior grid range [{lo}, {hi}]")]
    SliceOutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("slice x = {x} is not minimal (|d_s psi| = {slope:.3e} > {tol:.3e})")]
    NotMinimal { x: f64, slope: f64, tol: f64 },

    #[error("time step underflow: dt = {dt:.3e} below {limit:.3e} at t = {time}")]
    StepUnderflow { dt: f64, limit: f64, time: f64 },

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("balancing did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("monitor not applicable: {0}")]
    NotApplicable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
