//! Initial value problems `-w'' + q(s) w = E w` on `[-1, 1]`.
//!
//! The coefficient `q` is a piecewise polynomial assembled from a shape pair.
//! Integration uses an embedded Dormand-Prince 5(4) pair whose steps never
//! straddle a piece breakpoint. When `q - E` is constant on every piece the
//! exact trigonometric/hyperbolic propagator replaces stepping entirely, which
//! also makes the piecewise constant families exactly solvable.

use crate::potential::{poly_eval, ShapePotential};
use crate::quad::merge_breakpoints;
use crate::{Error, Result};

/// Tolerances and step bounds for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.05, min_step: 1e-9 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.max_step && self.max_step <= 2.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 < min_step <= max_step <= 2, got {} and {}",
                self.min_step, self.max_step
            )));
        }
        Ok(())
    }
}

/// `q(s) = c_phi phi(s) + c_psi psi(s)` on the union partition of `[-1, 1]`.
///
/// Gaps become explicit zero pieces, so the partition always covers `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct EffectivePotential {
    breaks: Vec<f64>,
    polys: Vec<Vec<f64>>,
}

impl EffectivePotential {
    pub fn combine(phi: &ShapePotential, c_phi: f64, psi: &ShapePotential, c_psi: f64) -> Self {
        let mut breaks = merge_breakpoints(&phi.breakpoints(), &psi.breakpoints());
        breaks = merge_breakpoints(&breaks, &[-1.0, 1.0]);
        breaks.retain(|&b| (-1.0..=1.0).contains(&b));
        let mut polys = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let mut coeffs = vec![0.0];
            accumulate(&mut coeffs, phi.piece_coeffs_at(mid), c_phi);
            accumulate(&mut coeffs, psi.piece_coeffs_at(mid), c_psi);
            while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
                coeffs.pop();
            }
            polys.push(coeffs);
        }
        EffectivePotential { breaks, polys }
    }

    pub fn constant(c: f64) -> Self {
        EffectivePotential { breaks: vec![-1.0, 1.0], polys: vec![vec![c]] }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn eval(&self, s: f64) -> f64 {
        let i = self.piece_index(s);
        poly_eval(&self.polys[i], s)
    }

    /// True when every piece is a degree-zero polynomial.
    pub fn is_piecewise_constant(&self) -> bool {
        self.polys.iter().all(|p| p.len() == 1)
    }

    fn piece_index(&self, s: f64) -> usize {
        let n = self.polys.len();
        let i = self.breaks.partition_point(|&b| b <= s);
        i.saturating_sub(1).min(n - 1)
    }
}

fn accumulate(acc: &mut Vec<f64>, coeffs: Option<&[f64]>, scale: f64) {
    if let Some(c) = coeffs {
        if scale != 0.0 {
            if acc.len() < c.len() {
                acc.resize(c.len(), 0.0);
            }
            for (a, &x) in acc.iter_mut().zip(c) {
                *a += scale * x;
            }
        }
    }
}

/// Propagate `(w, w')` across a width `dx` on which `w'' = c w` exactly.
pub(crate) fn const_propagate(c: f64, dx: f64, w: f64, dw: f64) -> (f64, f64) {
    if c == 0.0 {
        (w + dw * dx, dw)
    } else if c > 0.0 {
        let g = c.sqrt();
        let (sh, ch) = ((g * dx).sinh(), (g * dx).cosh());
        (w * ch + dw * sh / g, w * g * sh + dw * ch)
    } else {
        let g = (-c).sqrt();
        let (sn, cs) = ((g * dx).sin(), (g * dx).cos());
        (w * cs + dw * sn / g, -w * g * sn + dw * cs)
    }
}

#[derive(Debug, Clone)]
enum Segment {
    /// Closed-form propagation on a constant-coefficient piece.
    Exact { s0: f64, s1: f64, c: f64, w0: f64, dw0: f64 },
    /// Quintic two-point Hermite record of one accepted step.
    Quintic { s0: f64, s1: f64, f0: f64, d0: f64, dd0: f64, f1: f64, d1: f64, dd1: f64 },
}

impl Segment {
    fn start(&self) -> f64 {
        match self {
            Segment::Exact { s0, .. } | Segment::Quintic { s0, .. } => *s0,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match self {
            Segment::Exact { s0, s1, .. } | Segment::Quintic { s0, s1, .. } => (*s0, *s1),
        }
    }

    fn eval_pair(&self, s: f64) -> (f64, f64) {
        match *self {
            Segment::Exact { s0, c, w0, dw0, .. } => const_propagate(c, s - s0, w0, dw0),
            Segment::Quintic { s0, s1, f0, d0, dd0, f1, d1, dd1 } => {
                let h = s1 - s0;
                let t = (s - s0) / h;
                quintic_eval(t, h, f0, d0, dd0, f1, d1, dd1)
            }
        }
    }
}

/// Two-point Hermite quintic on t in [0, 1]; returns (value, d/ds).
#[allow(clippy::too_many_arguments)]
fn quintic_eval(
    t: f64,
    h: f64,
    f0: f64,
    d0: f64,
    dd0: f64,
    f1: f64,
    d1: f64,
    dd1: f64,
) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let a = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let b = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let c = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let d = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let e = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let f = 0.5 * (t3 - 2.0 * t4 + t5);
    let val = f0 * a + h * d0 * b + h * h * dd0 * c + f1 * d + h * d1 * e + h * h * dd1 * f;

    let ap = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let bp = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let cp = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let dp = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let ep = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let fp = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    let deriv =
        (f0 * ap + h * d0 * bp + h * h * dd0 * cp + f1 * dp + h * d1 * ep + h * h * dd1 * fp) / h;
    (val, deriv)
}

/// Evaluable record of one IVP solution on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct DenseTrace {
    segs: Vec<Segment>,
}

impl DenseTrace {
    pub fn eval(&self, s: f64) -> f64 {
        self.eval_pair(s).0
    }

    pub fn eval_deriv(&self, s: f64) -> f64 {
        self.eval_pair(s).1
    }

    /// Value and derivative at `s` (clamped to the trace domain).
    pub fn eval_pair(&self, s: f64) -> (f64, f64) {
        let i = self
            .segs
            .partition_point(|seg| seg.start() <= s)
            .saturating_sub(1)
            .min(self.segs.len() - 1);
        self.segs[i].eval_pair(s)
    }

    /// Step intervals, for inspection.
    pub fn segment_bounds(&self) -> Vec<(f64, f64)> {
        self.segs.iter().map(Segment::bounds).collect()
    }
}

/// Terminal data and dense trace of one integration.
#[derive(Debug, Clone)]
pub struct IvpSolution {
    pub w1: f64,
    pub dw1: f64,
    pub trace: DenseTrace,
    /// Accumulated local truncation error estimates (zero on the exact path).
    pub error_estimate: f64,
    pub steps: usize,
}

/// Solve `-w'' + q w = E w` with data `(w0, dw0)` at `s = -1`.
///
/// Dispatches to the exact propagator when `q` is piecewise constant and to
/// the adaptive integrator otherwise.
pub fn integrate_ivp(
    q: &EffectivePotential,
    e: f64,
    w0: f64,
    dw0: f64,
    settings: &SolverSettings,
) -> Result<IvpSolution> {
    settings.validate()?;
    if !e.is_finite() || !w0.is_finite() || !dw0.is_finite() {
        return Err(Error::InvalidInput("non-finite IVP data".into()));
    }
    if q.is_piecewise_constant() {
        Ok(integrate_exact(q, e, w0, dw0))
    } else {
        adaptive(q, e, w0, dw0, settings)
    }
}

/// Adaptive integration regardless of the coefficient degree.
pub fn integrate_ivp_adaptive(
    q: &EffectivePotential,
    e: f64,
    w0: f64,
    dw0: f64,
    settings: &SolverSettings,
) -> Result<IvpSolution> {
    settings.validate()?;
    adaptive(q, e, w0, dw0, settings)
}

fn integrate_exact(q: &EffectivePotential, e: f64, w0: f64, dw0: f64) -> IvpSolution {
    let mut w = w0;
    let mut dw = dw0;
    let mut segs = Vec::with_capacity(q.polys.len());
    for (i, poly) in q.polys.iter().enumerate() {
        let (s0, s1) = (q.breaks[i], q.breaks[i + 1]);
        let c = poly[0] - e;
        segs.push(Segment::Exact { s0, s1, c, w0: w, dw0: dw });
        let next = const_propagate(c, s1 - s0, w, dw);
        w = next.0;
        dw = next.1;
    }
    let steps = segs.len();
    IvpSolution { w1: w, dw1: dw, trace: DenseTrace { segs }, error_estimate: 0.0, steps }
}

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

fn adaptive(
    q: &EffectivePotential,
    e: f64,
    w0: f64,
    dw0: f64,
    st: &SolverSettings,
) -> Result<IvpSolution> {
    let mut y = [w0, dw0];
    let mut segs = Vec::new();
    let mut err_acc = 0.0;
    let mut steps = 0usize;

    for (i, poly) in q.polys.iter().enumerate() {
        let (a, b) = (q.breaks[i], q.breaks[i + 1]);
        let rhs = |s: f64, y: &[f64; 2]| [y[1], (poly_eval(poly, s) - e) * y[0]];
        let mut s = a;
        let mut h_ctrl = st.max_step.min(b - a);
        while s < b {
            let h = h_ctrl.min(b - s);
            let k1 = rhs(s, &y);
            let mut k = [k1, [0.0; 2], [0.0; 2], [0.0; 2], [0.0; 2], [0.0; 2], [0.0; 2]];
            stage(&rhs, s, &y, h, &A2, &mut k, 1);
            stage(&rhs, s, &y, h, &A3, &mut k, 2);
            stage(&rhs, s, &y, h, &A4, &mut k, 3);
            stage(&rhs, s, &y, h, &A5, &mut k, 4);
            stage(&rhs, s, &y, h, &A6, &mut k, 5);
            let mut y5 = y;
            for j in 0..6 {
                y5[0] += h * B5[j] * k[j][0];
                y5[1] += h * B5[j] * k[j][1];
            }
            k[6] = rhs(s + h, &y5);
            let mut y4 = y;
            for j in 0..7 {
                y4[0] += h * B4[j] * k[j][0];
                y4[1] += h * B4[j] * k[j][1];
            }
            let mut norm: f64 = 0.0;
            let mut abs_err: f64 = 0.0;
            for j in 0..2 {
                let sc = st.abs_tol + st.rel_tol * y[j].abs().max(y5[j].abs());
                let d = y5[j] - y4[j];
                norm = norm.max((d / sc).abs());
                abs_err = abs_err.max(d.abs());
            }
            let factor = if norm.is_finite() {
                (0.9 * norm.powf(-0.2)).clamp(0.1, 5.0)
            } else {
                0.1
            };
            if norm <= 1.0 {
                segs.push(Segment::Quintic {
                    s0: s,
                    s1: s + h,
                    f0: y[0],
                    d0: y[1],
                    dd0: k1[1],
                    f1: y5[0],
                    d1: y5[1],
                    dd1: k[6][1],
                });
                err_acc += abs_err;
                steps += 1;
                s = if b - (s + h) < 1e-14 * (b - a).max(1.0) { b } else { s + h };
                y = y5;
                h_ctrl = (h * factor).min(st.max_step);
            } else {
                h_ctrl = h * factor;
                if h_ctrl < st.min_step {
                    return Err(Error::StepUnderflow { s, step: h_ctrl });
                }
            }
        }
    }
    Ok(IvpSolution {
        w1: y[0],
        dw1: y[1],
        trace: DenseTrace { segs },
        error_estimate: err_acc,
        steps,
    })
}

fn stage<F: Fn(f64, &[f64; 2]) -> [f64; 2]>(
    rhs: &F,
    s: f64,
    y: &[f64; 2],
    h: f64,
    a_row: &[f64],
    k: &mut [[f64; 2]; 7],
    idx: usize,
) {
    let mut yt = *y;
    for (j, &a) in a_row.iter().enumerate() {
        yt[0] += h * a * k[j][0];
        yt[1] += h * a * k[j][1];
    }
    k[idx] = rhs(s + C[idx] * h, &yt);
}

/// Boundary traces of the normalized solutions `u` (u(-1)=1, u'(-1)=0) and
/// `v` (v(-1)=0, v'(-1)=1) of `-w'' + (alpha phi + beta eps psi) w = (eps k)^2 w`.
#[derive(Debug, Clone, Copy)]
pub struct FundamentalPair {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub k: f64,
    pub u1: f64,
    pub du1: f64,
    pub v1: f64,
    pub dv1: f64,
    /// `|u1 dv1 - du1 v1 - 1|`
    pub wronskian_defect: f64,
}

/// A fundamental pair together with the full dense solutions.
#[derive(Debug, Clone)]
pub struct FundamentalSolves {
    pub pair: FundamentalPair,
    pub u: IvpSolution,
    pub v: IvpSolution,
}

pub fn fundamental_solves(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    beta: f64,
    eps: f64,
    k: f64,
    settings: &SolverSettings,
) -> Result<FundamentalSolves> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("eps must be nonnegative, got {eps}")));
    }
    if !alpha.is_finite() || !beta.is_finite() || !k.is_finite() {
        return Err(Error::InvalidInput("non-finite coupling parameters".into()));
    }
    let q = EffectivePotential::combine(phi, alpha, psi, beta * eps);
    let e = (eps * k) * (eps * k);
    let u = integrate_ivp(&q, e, 1.0, 0.0, settings)?;
    let v = integrate_ivp(&q, e, 0.0, 1.0, settings)?;
    let wronskian_defect = (u.w1 * v.dw1 - u.dw1 * v.w1 - 1.0).abs();
    let pair = FundamentalPair {
        alpha,
        beta,
        eps,
        k,
        u1: u.w1,
        du1: u.dw1,
        v1: v.w1,
        dv1: v.dw1,
        wronskian_defect,
    };
    Ok(FundamentalSolves { pair, u, v })
}

pub fn fundamental_pair(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    beta: f64,
    eps: f64,
    k: f64,
    settings: &SolverSettings,
) -> Result<FundamentalPair> {
    Ok(fundamental_solves(phi, psi, alpha, beta, eps, k, settings)?.pair)
}
