use thiserror::Error;

/// Errors raised by the numerical and statistical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OmtError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("tolerance not met: estimated error {estimate:.3e} exceeds {tolerance:.3e}")]
    ToleranceNotMet { estimate: f64, tolerance: f64 },

    #[error("root is not bracketed: g(lo) = {g_lo:.6e}, g(hi) = {g_hi:.6e}")]
    NoBracket { g_lo: f64, g_hi: f64 },

    #[error("maximum number of iterations ({0}) reached")]
    MaxIterations(usize),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("target power {target} is unachievable below N = {cap}")]
    Unachievable { target: f64, cap: u64 },
}

pub type Result<T> = std::result::Result<T, OmtError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(OmtError::Domain(msg.into()))
}
