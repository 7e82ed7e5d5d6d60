//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
///
/// Callers that map errors to process exit codes should treat
/// [`Error::Capacity`] as a resource-limit failure, construction-time
/// variants ([`Error::InvalidParameter`], [`Error::DimensionMismatch`],
/// [`Error::Unsupported`]) as configuration failures, and the remaining
/// variants as numerical failures of an otherwise valid run.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two arguments disagree about a shared dimension (sites, patterns, q).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The requested combination is outside the implemented model family.
    #[error("unsupported model: {0}")]
    Unsupported(String),

    /// The request exceeds a hard resource cap (state-space or pattern count).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A trajectory left the guard region |entry| <= bound and is diverging.
    #[error("trajectory exceeded |entry| = {bound:e} at t = {t}; integration aborted")]
    BlowUp { t: f64, bound: f64 },

    /// An iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A stationarity precondition failed (the supplied state is not a fixed point).
    #[error("not a fixed point: |rhs|_inf = {residual:e} exceeds tolerance {tolerance:e}")]
    NotAFixedPoint { residual: f64, tolerance: f64 },

    /// A conserved quantity drifted beyond tolerance; the step size is too coarse.
    #[error("integrator accuracy lost at t = {t}: {what}; reduce the step size")]
    IntegratorAccuracy { t: f64, what: String },

    /// NaN or infinity appeared where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A requested sampling window is not covered by the recorded trajectory.
    #[error("window [{lo}, {hi}] outside recorded span [{t_lo}, {t_hi}]")]
    WindowOutOfRange { lo: f64, hi: f64, t_lo: f64, t_hi: f64 },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
