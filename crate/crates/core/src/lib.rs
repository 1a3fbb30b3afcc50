//! Solvable models for one-dimensional Schrodinger operators with squeezed
//! delta-prime and delta-like potentials.
//!
//! The crate builds the short-range potentials
//! `V_eps(x) = alpha eps^-2 phi(x/eps) + beta eps^-1 psi(x/eps)` from
//! piecewise polynomial shapes, locates the resonant coupling constants at
//! which a zero-energy half-bound state exists, and compares the finite-eps
//! scattering and resolvent data with the point-interaction models that
//! describe the eps -> 0 limit.

// NaN-rejecting `!(x > 0)` guards and full-precision node tables are
// deliberate here.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

mod error;

pub mod ode;
pub mod potential;
pub mod quad;
pub mod resolvent;
pub mod resonance;
pub mod scattering;

pub use error::{Error, Result};
