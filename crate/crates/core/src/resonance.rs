//! Resonant couplings of the fast-scale shape and the maps they induce.
//!
//! A coupling `alpha` is resonant when the zero-energy Neumann problem
//! `-u'' + alpha Phi u = 0` on `[-1, 1]`, `u'(-1) = u'(1) = 0`, has a
//! nontrivial solution (a half-bound state). Shooting from `s = -1` with
//! `u(-1) = 1`, `u'(-1) = 0` turns the condition into a one-dimensional
//! root search for `u'(1)` as a function of `alpha`.

use rayon::prelude::*;

use crate::ode::{integrate_ivp, DenseTrace, EffectivePotential, SolverSettings};
use crate::potential::ShapePotential;
use crate::quad::{composite_gauss16, inclusive_grid, merge_breakpoints, refine_panels};
use crate::{Error, Result};

/// Default coupling window for [`scan_resonances`].
pub const DEFAULT_SCAN_WINDOW: (f64, f64) = (-50.0, 50.0);
/// Default grid step of the residual scan.
pub const DEFAULT_SCAN_STEP: f64 = 0.05;
/// Default bisection tolerance on the root abscissa.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

const BISECT_MAX_ITER: usize = 200;
/// Longest quadrature panel used when integrating `Psi u^2`.
const KAPPA_PANEL: f64 = 0.25;

/// One resonant coupling together with its half-bound state and the two
/// associated maps. `theta` is the ratio of the boundary limits of the
/// half-bound state, `kappa` couples the slow-scale shape to it.
#[derive(Debug, Clone)]
pub struct ResonanceRecord {
    pub alpha: f64,
    /// `u(1)` under the normalization `u(-1) = 1`.
    pub theta: f64,
    /// `theta^{-1} * integral of Psi u^2` over `[-1, 1]`.
    pub kappa: f64,
    /// `|u'(1)|` actually achieved at the accepted coupling.
    pub residual: f64,
    /// Dense trace of the half-bound state on `[-1, 1]`.
    pub half_bound_trace: DenseTrace,
}

/// Result of a residual scan over a coupling window.
#[derive(Debug, Clone)]
pub struct ResonantSet {
    /// Accepted roots, strictly increasing in `alpha`.
    pub records: Vec<ResonanceRecord>,
    pub scan_window: (f64, f64),
    pub scan_step: f64,
    /// Grid couplings where `|u'(1)|` dips below `sqrt(root_tol)` without a
    /// sign change: likely double roots that bisection cannot certify.
    pub near_tangential: Vec<f64>,
}

impl ResonantSet {
    pub fn alphas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.alpha).collect()
    }
}

/// `u'(1)` of the shooting solution with `u(-1) = 1`, `u'(-1) = 0` for
/// `-u'' + alpha Phi u = 0`. Zeros in `alpha` are exactly the resonant set.
pub fn shooting_residual(
    phi: &ShapePotential,
    alpha: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    if !alpha.is_finite() {
        return Err(Error::InvalidInput(format!(
            "alpha must be finite, got {alpha}"
        )));
    }
    let q = EffectivePotential::combine(phi, alpha, &ShapePotential::zero(), 0.0);
    Ok(integrate_ivp(&q, 0.0, 1.0, 0.0, settings)?.dw1)
}

/// Build the record for a coupling already certified as resonant.
fn build_record(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    settings: &SolverSettings,
) -> Result<ResonanceRecord> {
    let q = EffectivePotential::combine(phi, alpha, &ShapePotential::zero(), 0.0);
    let sol = integrate_ivp(&q, 0.0, 1.0, 0.0, settings)?;
    let theta = sol.w1;
    if theta.abs() < 1e-12 {
        // u(1) = u'(1) = 0 would force u = 0, contradicting u(-1) = 1.
        return Err(Error::NotConverged {
            context: format!("half-bound state vanishes at s = 1 for alpha = {alpha}"),
        });
    }
    let trace = sol.trace;
    let shape_breaks = merge_breakpoints(&phi.breakpoints(), &psi.breakpoints());
    let breaks = refine_panels(&merge_breakpoints(&shape_breaks, &[-1.0, 1.0]), KAPPA_PANEL);
    let integral = composite_gauss16(|s| psi.evaluate(s) * trace.eval(s).powi(2), &breaks);
    Ok(ResonanceRecord {
        alpha,
        theta,
        kappa: integral / theta,
        residual: sol.dw1.abs(),
        half_bound_trace: trace,
    })
}

/// Record for a user-supplied coupling. Unlike the scan, this recomputes the
/// shooting residual and refuses couplings that do not satisfy
/// `|u'(1)| <= root_tol`.
pub fn resonance_record(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    root_tol: f64,
    settings: &SolverSettings,
) -> Result<ResonanceRecord> {
    if !(root_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "root_tol must be positive, got {root_tol}"
        )));
    }
    let residual = shooting_residual(phi, alpha, settings)?;
    if residual.abs() > root_tol {
        return Err(Error::NotResonant { alpha, residual });
    }
    build_record(phi, psi, alpha, settings)
}

/// Scan `[window.0, window.1]` with the given step, bracket sign changes of
/// the shooting residual, and bisect each bracket down to `root_tol`.
///
/// The coupling 0 is always resonant (`u = 1`), yet for shapes with zero mean
/// the residual has a double root there and no sign change; it is therefore
/// inserted unconditionally whenever the window contains it. Residuals on the
/// grid are evaluated in parallel; output order is deterministic.
pub fn scan_resonances(
    phi: &ShapePotential,
    psi: &ShapePotential,
    window: (f64, f64),
    step: f64,
    root_tol: f64,
    settings: &SolverSettings,
) -> Result<ResonantSet> {
    if phi.is_zero() {
        return Err(Error::ZeroShape);
    }
    if !(root_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "root_tol must be positive, got {root_tol}"
        )));
    }
    if !(window.0 < window.1) {
        return Err(Error::InvalidInput(format!(
            "scan window must satisfy min < max, got [{}, {}]",
            window.0, window.1
        )));
    }
    let grid = inclusive_grid(window.0, window.1, step)?;
    let residuals: Vec<f64> = grid
        .par_iter()
        .map(|&a| shooting_residual(phi, a, settings))
        .collect::<Result<_>>()?;

    let mut roots: Vec<f64> = Vec::new();
    for i in 0..grid.len() {
        if residuals[i] == 0.0 {
            roots.push(grid[i]);
        } else if i + 1 < grid.len()
            && residuals[i + 1] != 0.0
            && residuals[i] * residuals[i + 1] < 0.0
        {
            roots.push(bisect(
                phi,
                grid[i],
                grid[i + 1],
                residuals[i],
                root_tol,
                settings,
            )?);
        }
    }
    for r in roots.iter_mut() {
        if r.abs() <= 10.0 * root_tol {
            *r = 0.0;
        }
    }
    if window.0 <= 0.0 && 0.0 <= window.1 && !roots.contains(&0.0) {
        roots.push(0.0);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= (10.0 * root_tol).max(f64::EPSILON * b.abs()));

    let near_tangential =
        flag_near_tangential(&grid, &residuals, &roots, step, root_tol.sqrt());

    let records = roots
        .iter()
        .map(|&a| build_record(phi, psi, a, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResonantSet {
        records,
        scan_window: window,
        scan_step: step,
        near_tangential,
    })
}

/// Interior grid points where `|residual|` has a local minimum below
/// `thresh` without a sign change and no accepted root nearby.
fn flag_near_tangential(
    grid: &[f64],
    residuals: &[f64],
    roots: &[f64],
    step: f64,
    thresh: f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..grid.len().saturating_sub(1) {
        let (p, c, n) = (residuals[i - 1], residuals[i], residuals[i + 1]);
        if c != 0.0
            && c.abs() < thresh
            && c.abs() <= p.abs()
            && c.abs() <= n.abs()
            && p * c > 0.0
            && c * n > 0.0
            && !roots.iter().any(|&r| (r - grid[i]).abs() <= 2.0 * step)
        {
            out.push(grid[i]);
        }
    }
    out
}

fn bisect(
    phi: &ShapePotential,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    root_tol: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= root_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = shooting_residual(phi, mid, settings)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Limit coupling matrix `[[theta, 0], [beta kappa, 1/theta]]`.
pub fn coupling_matrix(rec: &ResonanceRecord, beta: f64) -> [[f64; 2]; 2] {
    [
        [rec.theta, 0.0],
        [beta * rec.kappa, 1.0 / rec.theta],
    ]
}

/// Product-formula comparison matrix
/// `[[(2+a)/(2-a), 0], [4b/(2-a)^2, (2-a)/(2+a)]]`, singular at `a = ±2`.
pub fn kurasov_matrix(alpha: f64, beta: f64) -> Result<[[f64; 2]; 2]> {
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidInput(
            "non-finite coupling parameters".into(),
        ));
    }
    if alpha == 2.0 || alpha == -2.0 {
        return Err(Error::SingularAlpha { alpha });
    }
    let den = 2.0 - alpha;
    Ok([
        [(2.0 + alpha) / den, 0.0],
        [4.0 * beta / (den * den), den / (2.0 + alpha)],
    ])
}
