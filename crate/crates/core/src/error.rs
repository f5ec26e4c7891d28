use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pair (A, B) is not controllable (Kalman rank {rank} < {n})")]
    SingularControllability { rank: usize, n: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("degenerate equilibrium: {0}")]
    DegenerateEquilibrium(String),

    #[error("field vanishes on the sphere of radius {radius} (|f| = {norm:e})")]
    ZeroOnSphere { radius: f64, norm: f64 },

    #[error("winding refinement did not resolve the field: {0}")]
    Resolution(String),

    #[error("no regular value found after {attempts} draws")]
    DegenerateValue { attempts: usize },

    #[error("singular matrix equation: {0}")]
    SingularEquation(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },

    #[error("random system generation failed for seed {seed}: {reason}")]
    Generator { seed: u64, reason: String },

    #[error("ray scan geometry error: fate at r_lo = {r_lo} is {lo_fate}, fate at r_hi = {r_hi} is {hi_fate}")]
    Geometry {
        r_lo: f64,
        r_hi: f64,
        lo_fate: String,
        hi_fate: String,
    },

    #[error("system file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

/// False for NaN, infinities, zero and negatives.
pub(crate) fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}
