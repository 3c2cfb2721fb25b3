use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OsaError {
    #[error("{what} = {value} is outside [0, 1]")]
    Probability { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("scale guard exceeded: {0}")]
    ScaleGuard(String),

    #[error("unsupported request: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, OsaError>;

/// Absolute tolerance used for probability-domain checks.
pub const TOL: f64 = 1e-12;

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() || !(-TOL..=1.0 + TOL).contains(&value) {
        return Err(OsaError::Probability { what, value });
    }
    Ok(value.clamp(0.0, 1.0))
}
