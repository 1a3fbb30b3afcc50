//! Resolvents of the squeezed operator and of its zero-range limit.
//!
//! The limit resolvent `(S - zeta)^{-1} f` is assembled in closed form by
//! variation of parameters with the decaying exponentials `e^{±i omega x}`,
//! `omega = sqrt(zeta)` on the branch with positive imaginary part. The
//! matching at the origin is either the two-parameter resonant coupling or
//! the split Dirichlet pair. The finite-`eps` resolvent is a second-order
//! finite-difference solve on a truncated interval with exactly cell-averaged
//! barrier coefficients.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ode::SolverSettings;
use crate::potential::{PiecewisePoly, ShapePotential};
use crate::quad::{fit_log_order, tail_decreasing};
use crate::resonance::{resonance_record, shooting_residual};
use crate::scattering::{validate_eps_list, ResonantCoupling};
use crate::{Error, Result};

/// Point interaction the squeezed family converges to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitOperator {
    /// Two-parameter coupling: `y(+0) = mu y(-0)`,
    /// `y'(+0) = mu^{-1} y'(-0) + nu y(-0)`.
    Resonant { mu: f64, nu: f64 },
    /// Dirichlet decoupling `y(-0) = y(+0) = 0`.
    NonResonantSplit,
}

impl LimitOperator {
    pub fn from_coupling(c: &ResonantCoupling, beta: f64) -> Self {
        LimitOperator::Resonant {
            mu: c.theta,
            nu: beta * c.kappa,
        }
    }

    fn validate(&self) -> Result<()> {
        if let LimitOperator::Resonant { mu, nu } = self {
            if !mu.is_finite() || !nu.is_finite() {
                return Err(Error::InvalidInput(
                    "non-finite limit operator parameters".into(),
                ));
            }
            if *mu == 0.0 {
                return Err(Error::InvalidInput(
                    "resonant limit operator requires mu != 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Right-hand side, spectral point and discretization of one resolvent probe.
#[derive(Debug, Clone)]
pub struct ResolventProbe {
    pub f: PiecewisePoly,
    pub zeta: Complex64,
    /// Truncation half width `L`: the discrete problem lives on `[-L, L]`.
    pub half_width: f64,
    pub grid_step: f64,
}

/// Largest admissible boundary-truncation estimate for a probe.
const TRUNCATION_GUARD: f64 = 1e-3;

impl ResolventProbe {
    /// `sqrt(zeta)` on the branch with positive imaginary part.
    pub fn omega(&self) -> Complex64 {
        sqrt_upper(self.zeta)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.zeta.is_finite() || self.zeta.im == 0.0 {
            return Err(Error::InvalidInput(
                "zeta must be finite with nonzero imaginary part".into(),
            ));
        }
        if !(self.half_width >= 4.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidInput(format!(
                "domain half width must be at least 4, got {}",
                self.half_width
            )));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid step must be positive, got {}",
                self.grid_step
            )));
        }
        if let Some((lo, hi)) = self.f.support() {
            if lo <= -self.half_width || hi >= self.half_width {
                return Err(Error::InvalidInput(
                    "f must be supported strictly inside the domain".into(),
                ));
            }
            let omega = self.omega();
            let margin = self.half_width - lo.abs().max(hi.abs());
            let estimate = self.f.sup_bound() * (hi - lo) / (2.0 * omega.norm())
                * (-omega.im * margin).exp();
            if estimate > TRUNCATION_GUARD {
                return Err(Error::InvalidInput(format!(
                    "boundary truncation estimate {estimate:e} exceeds {TRUNCATION_GUARD:e}; enlarge the domain half width"
                )));
            }
        }
        Ok(())
    }
}

/// Principal square root flipped onto the upper half plane.
fn sqrt_upper(z: Complex64) -> Complex64 {
    let w = z.sqrt();
    if w.im < 0.0 {
        -w
    } else {
        w
    }
}

/// Exact `integral of p(t) e^{c t}` over `[a, b]` for a polynomial `p`.
///
/// Uses the antiderivative `G(t) e^{c t}` with `G' + c G = p`, solved for the
/// coefficients of `G` from the top degree down.
fn poly_exp_integral(coeffs: &[f64], a: f64, b: f64, c: Complex64) -> Complex64 {
    let n = coeffs.len();
    let mut g = vec![Complex64::ZERO; n];
    for j in (0..n).rev() {
        let carry = if j + 1 < n {
            (j as f64 + 1.0) * g[j + 1]
        } else {
            Complex64::ZERO
        };
        g[j] = (Complex64::new(coeffs[j], 0.0) - carry) / c;
    }
    let eval = |t: f64| {
        let mut acc = Complex64::ZERO;
        for &gj in g.iter().rev() {
            acc = acc * t + gj;
        }
        acc * (c * t).exp()
    };
    eval(b) - eval(a)
}

/// Free-space particular solution and its derivative at `x`:
/// `y = (i / 2 omega) [e^{i omega x} I_-(x) + e^{-i omega x} I_+(x)]` with
/// `I_-(x) = int_{-inf}^x e^{-i omega t} f dt`, `I_+(x) = int_x^inf e^{i omega t} f dt`.
fn free_parts(f: &PiecewisePoly, omega: Complex64, x: f64) -> (Complex64, Complex64) {
    let iom = Complex64::i() * omega;
    let mut i_minus = Complex64::ZERO;
    let mut i_plus = Complex64::ZERO;
    for p in f.pieces() {
        let [a, b] = p.interval;
        if a < x {
            i_minus += poly_exp_integral(&p.coeffs, a, b.min(x), -iom);
        }
        if b > x {
            i_plus += poly_exp_integral(&p.coeffs, a.max(x), b, iom);
        }
    }
    let e_plus = (iom * x).exp();
    let e_minus = (-iom * x).exp();
    let y = Complex64::i() / (2.0 * omega) * (e_plus * i_minus + e_minus * i_plus);
    let dy = -0.5 * (e_plus * i_minus - e_minus * i_plus);
    (y, dy)
}

/// Boundary data of the limit solution on both sides of the origin.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryValues {
    pub y_minus: Complex64,
    pub dy_minus: Complex64,
    pub y_plus: Complex64,
    pub dy_plus: Complex64,
}

/// Closed-form resolvent of the limit operator, evaluable anywhere.
#[derive(Debug, Clone)]
pub struct LimitResolvent {
    pub operator: LimitOperator,
    pub zeta: Complex64,
    pub omega: Complex64,
    f: PiecewisePoly,
    /// Coefficient of `e^{-i omega x}` added on `x < 0`.
    a_minus: Complex64,
    /// Coefficient of `e^{+i omega x}` added on `x > 0`.
    b_plus: Complex64,
}

impl LimitResolvent {
    /// Solution value; at `x = 0` this is the right-side limit `y(+0)`.
    pub fn eval(&self, x: f64) -> Complex64 {
        let (y, _) = free_parts(&self.f, self.omega, x);
        y + self.homogeneous(x).0
    }

    pub fn eval_deriv(&self, x: f64) -> Complex64 {
        let (_, dy) = free_parts(&self.f, self.omega, x);
        dy + self.homogeneous(x).1
    }

    /// Second derivative from the same exponential representation; useful to
    /// check the differential equation independently of `eval`.
    pub fn eval_second(&self, x: f64) -> Complex64 {
        let iom = Complex64::i() * self.omega;
        let mut i_minus = Complex64::ZERO;
        let mut i_plus = Complex64::ZERO;
        for p in self.f.pieces() {
            let [a, b] = p.interval;
            if a < x {
                i_minus += poly_exp_integral(&p.coeffs, a, b.min(x), -iom);
            }
            if b > x {
                i_plus += poly_exp_integral(&p.coeffs, a.max(x), b, iom);
            }
        }
        let e_plus = (iom * x).exp();
        let e_minus = (-iom * x).exp();
        let free = -iom / 2.0 * (e_plus * i_minus + e_minus * i_plus)
            - Complex64::new(self.f.evaluate(x), 0.0);
        let om2 = self.omega * self.omega;
        free - om2 * self.homogeneous(x).0
    }

    fn homogeneous(&self, x: f64) -> (Complex64, Complex64) {
        let iom = Complex64::i() * self.omega;
        if x < 0.0 {
            let e = (-iom * x).exp();
            (self.a_minus * e, -iom * self.a_minus * e)
        } else {
            let e = (iom * x).exp();
            (self.b_plus * e, iom * self.b_plus * e)
        }
    }

    /// One-sided limits at the origin.
    pub fn boundary_values(&self) -> BoundaryValues {
        let (yf0, dyf0) = free_parts(&self.f, self.omega, 0.0);
        let iom = Complex64::i() * self.omega;
        BoundaryValues {
            y_minus: yf0 + self.a_minus,
            dy_minus: dyf0 - iom * self.a_minus,
            y_plus: yf0 + self.b_plus,
            dy_plus: dyf0 + iom * self.b_plus,
        }
    }

    /// Residuals of the two origin conditions actually imposed.
    pub fn matching_defect(&self) -> (f64, f64) {
        let b = self.boundary_values();
        match self.operator {
            LimitOperator::NonResonantSplit => (b.y_minus.norm(), b.y_plus.norm()),
            LimitOperator::Resonant { mu, nu } => (
                (b.y_plus - mu * b.y_minus).norm(),
                (b.dy_plus - b.dy_minus / mu - nu * b.y_minus).norm(),
            ),
        }
    }

    /// Sample the solution on the interior nodes of a uniform grid.
    pub fn grid_trace(&self, half_width: f64, h: f64) -> GridTrace {
        let n = (2.0 * half_width / h).ceil().max(2.0) as usize;
        let h_eff = 2.0 * half_width / n as f64;
        let mut xs = Vec::with_capacity(n - 1);
        let mut ys = Vec::with_capacity(n - 1);
        for i in 1..n {
            let x = -half_width + i as f64 * h_eff;
            xs.push(x);
            ys.push(self.eval(x));
        }
        GridTrace {
            xs,
            ys,
            h: h_eff,
            half_width,
        }
    }
}

/// Solve the limit resolvent for one probe.
pub fn solve_limit_resolvent(
    op: LimitOperator,
    probe: &ResolventProbe,
) -> Result<LimitResolvent> {
    op.validate()?;
    probe.validate()?;
    let omega = sqrt_upper(probe.zeta);
    let (yf0, dyf0) = free_parts(&probe.f, omega, 0.0);
    let (a_minus, b_plus) = match op {
        LimitOperator::NonResonantSplit => (-yf0, -yf0),
        LimitOperator::Resonant { mu, nu } => {
            // unknowns (A, B) from the two matching conditions:
            //   B - mu A = (mu - 1) yf0
            //   (i omega / mu - nu) A + i omega B = (1/mu - 1) dyf0 + nu yf0
            let iom = Complex64::i() * omega;
            let m11 = Complex64::new(-mu, 0.0);
            let m12 = Complex64::new(1.0, 0.0);
            let m21 = iom / mu - nu;
            let m22 = iom;
            let r1 = (mu - 1.0) * yf0;
            let r2 = (1.0 / mu - 1.0) * dyf0 + nu * yf0;
            let det = m11 * m22 - m12 * m21;
            if det.norm() < 1e-14 {
                return Err(Error::DegenerateDenominator {
                    magnitude: det.norm(),
                });
            }
            ((r1 * m22 - m12 * r2) / det, (m11 * r2 - m21 * r1) / det)
        }
    };
    Ok(LimitResolvent {
        operator: op,
        zeta: probe.zeta,
        omega,
        f: probe.f.clone(),
        a_minus,
        b_plus,
    })
}

/// Complex-valued solution samples on a uniform interior grid.
#[derive(Debug, Clone)]
pub struct GridTrace {
    pub xs: Vec<f64>,
    pub ys: Vec<Complex64>,
    pub h: f64,
    pub half_width: f64,
}

impl GridTrace {
    /// Discrete L2 norm `sqrt(h sum |y|^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.h * self.ys.iter().map(|y| y.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Value at the node nearest to `x`.
    pub fn value_at(&self, x: f64) -> Complex64 {
        let i = ((x + self.half_width) / self.h).round() as isize - 1;
        let i = i.clamp(0, self.ys.len() as isize - 1) as usize;
        self.ys[i]
    }
}

/// Finite-difference resolvent of the squeezed operator on `[-L, L]` with
/// Dirichlet ends. Barrier and data are averaged exactly over each cell.
pub fn solve_eps_resolvent(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    beta: f64,
    eps: f64,
    probe: &ResolventProbe,
) -> Result<GridTrace> {
    probe.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidInput("non-finite coupling parameters".into()));
    }
    if probe.grid_step > eps / 32.0 {
        return Err(Error::InvalidInput(format!(
            "grid step {} must not exceed eps/32 = {:e} to resolve the barrier",
            probe.grid_step,
            eps / 32.0
        )));
    }
    let l = probe.half_width;
    let n = (2.0 * l / probe.grid_step).ceil() as usize;
    let h = 2.0 * l / n as f64;
    let inv_h2 = 1.0 / (h * h);

    let m = n - 1;
    let mut xs = Vec::with_capacity(m);
    let mut diag = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 1..n {
        let x = -l + i as f64 * h;
        let (lo, hi) = (x - 0.5 * h, x + 0.5 * h);
        let vbar = alpha / (eps * h) * phi.integral_on(lo / eps, hi / eps)
            + beta / h * psi.integral_on(lo / eps, hi / eps);
        let fbar = probe.f.integral_on(lo, hi) / h;
        xs.push(x);
        diag.push(Complex64::new(2.0 * inv_h2 + vbar - probe.zeta.re, -probe.zeta.im));
        rhs.push(Complex64::new(fbar, 0.0));
    }
    let ys = thomas_solve(&mut diag, -inv_h2, &mut rhs)?;
    Ok(GridTrace {
        xs,
        ys,
        h,
        half_width: l,
    })
}

/// Growth factors beyond this trip `IllConditioned`.
const GROWTH_LIMIT: f64 = 1e8;

/// Tridiagonal solve with constant off-diagonal, tracking element growth.
fn thomas_solve(
    diag: &mut [Complex64],
    off: f64,
    rhs: &mut [Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let mut max_input = off.abs();
    for d in diag.iter() {
        max_input = max_input.max(d.norm());
    }
    let mut max_pivot = 0.0f64;
    for i in 0..n {
        if i > 0 {
            let m = off / diag[i - 1];
            diag[i] -= m * off;
            let prev = rhs[i - 1];
            rhs[i] -= m * prev;
        }
        let p = diag[i].norm();
        if p == 0.0 {
            return Err(Error::IllConditioned {
                growth: f64::INFINITY,
            });
        }
        max_pivot = max_pivot.max(p);
    }
    let growth = max_pivot / max_input;
    if growth > GROWTH_LIMIT {
        return Err(Error::IllConditioned { growth });
    }
    let mut ys = vec![Complex64::ZERO; n];
    ys[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        ys[i] = (rhs[i] - off * ys[i + 1]) / diag[i];
    }
    Ok(ys)
}

/// Options for the resolvent-convergence study.
#[derive(Debug, Clone)]
pub struct ResolventRateOptions {
    /// Cells per `eps`: the grid step at scale `eps` is `eps / steps_per_eps`.
    pub steps_per_eps: usize,
    pub resonance_tol: f64,
    pub noise_floor: f64,
    pub settings: SolverSettings,
}

impl Default for ResolventRateOptions {
    fn default() -> Self {
        Self {
            steps_per_eps: 64,
            resonance_tol: 1e-8,
            noise_floor: 1e-12,
            settings: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ResolventRatePoint {
    pub eps: f64,
    pub h: f64,
    pub err_l2: f64,
}

#[derive(Debug, Clone)]
pub struct ResolventRateReport {
    pub operator: LimitOperator,
    pub points: Vec<ResolventRatePoint>,
    pub order: Option<f64>,
}

/// Compare the finite-`eps` resolvent against the limit model over a
/// decreasing list of widths and fit the error order.
///
/// The discrete L2 error excludes nodes with `|x| <= eps`, where the limit
/// solution is not the right comparison object. The limit operator is chosen
/// by a resonance test on `alpha`.
pub fn resolvent_error(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    beta: f64,
    eps_list: &[f64],
    probe: &ResolventProbe,
    opts: &ResolventRateOptions,
) -> Result<ResolventRateReport> {
    validate_eps_list(eps_list)?;
    probe.validate()?;
    if opts.steps_per_eps < 32 {
        return Err(Error::InvalidInput(format!(
            "steps_per_eps must be at least 32, got {}",
            opts.steps_per_eps
        )));
    }
    if !(opts.resonance_tol > 0.0) || !(opts.noise_floor >= 0.0) {
        return Err(Error::InvalidInput(
            "resonance_tol must be positive and noise_floor nonnegative".into(),
        ));
    }

    let residual = shooting_residual(phi, alpha, &opts.settings)?;
    let operator = if residual.abs() <= opts.resonance_tol {
        let rec = resonance_record(phi, psi, alpha, opts.resonance_tol, &opts.settings)?;
        LimitOperator::Resonant {
            mu: rec.theta,
            nu: beta * rec.kappa,
        }
    } else {
        LimitOperator::NonResonantSplit
    };
    let limit = solve_limit_resolvent(operator, probe)?;

    let points: Vec<ResolventRatePoint> = eps_list
        .par_iter()
        .map(|&eps| -> Result<ResolventRatePoint> {
            let scaled = ResolventProbe {
                grid_step: eps / opts.steps_per_eps as f64,
                ..probe.clone()
            };
            let trace = solve_eps_resolvent(phi, psi, alpha, beta, eps, &scaled)?;
            let mut acc = 0.0;
            for (x, y) in trace.xs.iter().zip(&trace.ys) {
                if x.abs() > eps {
                    acc += (y - limit.eval(*x)).norm_sqr();
                }
            }
            Ok(ResolventRatePoint {
                eps,
                h: trace.h,
                err_l2: (trace.h * acc).sqrt(),
            })
        })
        .collect::<Result<_>>()?;

    let errs: Vec<f64> = points.iter().map(|p| p.err_l2).collect();
    if !tail_decreasing(&errs, opts.noise_floor) {
        return Err(Error::NotConverged {
            context: "resolvent errors do not decrease over the last three eps".into(),
        });
    }
    Ok(ResolventRateReport {
        operator,
        points,
        order: fit_log_order(eps_list, &errs, opts.noise_floor),
    })
}
