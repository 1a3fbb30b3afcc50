use thiserror::Error;

/// Error type shared by all numerical routines in this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A shape file or shape constructor violated a structural requirement.
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// A parameter (tolerance, grid, probe, ...) is outside its admissible range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The adaptive integrator would need a step below the configured minimum.
    #[error("step size underflow at s = {s} (required step {step:e})")]
    StepUnderflow { s: f64, step: f64 },

    /// A resonance scan was requested for an identically zero shape.
    #[error("resonance scan requires a shape that is not identically zero")]
    ZeroShape,

    /// The coupling constant does not satisfy the half-bound-state condition.
    #[error("alpha = {alpha} is not resonant (|shooting residual| = {residual:e})")]
    NotResonant { alpha: f64, residual: f64 },

    /// The comparison matrix is undefined at alpha = +/-2.
    #[error("comparison matrix is singular at alpha = {alpha}")]
    SingularAlpha { alpha: f64 },

    /// The scattering denominator vanished beyond recovery.
    #[error("degenerate scattering denominator (|D| = {magnitude:e})")]
    DegenerateDenominator { magnitude: f64 },

    /// An error sequence that should shrink failed to do so.
    #[error("convergence failure: {context}")]
    NotConverged { context: String },

    /// The tridiagonal solve showed excessive element growth.
    #[error("tridiagonal solve ill conditioned (growth factor {growth:e})")]
    IllConditioned { growth: f64 },
}

impl Error {
    /// True for errors caused by malformed input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidShape(_)
                | Error::InvalidInput(_)
                | Error::ZeroShape
                | Error::NotResonant { .. }
                | Error::SingularAlpha { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
