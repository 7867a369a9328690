use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Density took a non-positive (or below floor) value.
    #[error("positivity violation at index {index}: value {value:e}")]
    Positivity { index: usize, value: f64 },

    /// Explicit time step above the CFL limit.
    #[error("stability violation: dt = {dt:e} exceeds limit {limit:e}")]
    Stability { dt: f64, limit: f64 },

    /// Iterative solver hit its iteration cap.
    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("cardinality mismatch: {0} vs {1}")]
    Cardinality(usize, usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
