//! Shared oracles for the integration tests: independent reimplementations
//! (transfer matrices, dense eigenvalue and resolvent solves, Green-kernel
//! quadrature) that the library must agree with.

#![allow(dead_code)]

use dplab_core::potential::{Piece, ShapePotential};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Terminal data of the normalized fundamental pair.
#[derive(Debug, Clone, Copy)]
pub struct TmPair {
    pub u1: f64,
    pub du1: f64,
    pub v1: f64,
    pub dv1: f64,
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Fundamental pair of `-w'' + (alpha phi + beta eps psi) w = (eps k)^2 w` on
/// `[-1, 1]` for piecewise-constant raw shape descriptions, by multiplying
/// closed-form interval propagators.
pub fn transfer_pair(
    phi: &[(f64, f64, f64)],
    psi: &[(f64, f64, f64)],
    alpha: f64,
    beta: f64,
    eps: f64,
    k: f64,
) -> TmPair {
    let mut cuts = vec![-1.0, 1.0];
    for &(a, b, _) in phi.iter().chain(psi.iter()) {
        cuts.push(a);
        cuts.push(b);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let value = |segs: &[(f64, f64, f64)], x: f64| {
        segs.iter()
            .find(|&&(a, b, _)| a <= x && x < b)
            .map(|&(_, _, c)| c)
            .unwrap_or(0.0)
    };
    let e = (eps * k) * (eps * k);
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    for w in cuts.windows(2) {
        let d = w[1] - w[0];
        if d <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let c = alpha * value(phi, mid) + beta * eps * value(psi, mid) - e;
        let step = if c == 0.0 {
            [[1.0, d], [0.0, 1.0]]
        } else if c > 0.0 {
            let g = c.sqrt();
            let (sh, ch) = ((g * d).sinh(), (g * d).cosh());
            [[ch, sh / g], [g * sh, ch]]
        } else {
            let g = (-c).sqrt();
            let (sn, cs) = ((g * d).sin(), (g * d).cos());
            [[cs, sn / g], [-g * sn, cs]]
        };
        m = mat_mul(step, m);
    }
    TmPair {
        u1: m[0][0],
        du1: m[1][0],
        v1: m[0][1],
        dv1: m[1][1],
    }
}

/// Negative-eigenvalue count of the symmetric tridiagonal pencil
/// `A + alpha M` on a cell-centered Neumann grid, via Sturm pivots.
fn pencil_negative_count(pv: &[f64], h: f64, alpha: f64) -> i64 {
    let n = pv.len();
    let inv_h2 = 1.0 / (h * h);
    let mut count = 0i64;
    let mut d_prev = 0.0f64;
    for (i, &p) in pv.iter().enumerate() {
        let diag_a = if i == 0 || i == n - 1 { inv_h2 } else { 2.0 * inv_h2 };
        let t = diag_a + alpha * p;
        let mut d = if i == 0 { t } else { t - inv_h2 * inv_h2 / d_prev };
        if d == 0.0 {
            d = -f64::MIN_POSITIVE;
        }
        if d < 0.0 {
            count += 1;
        }
        d_prev = d;
    }
    count
}

/// Resonant couplings of `-u'' + alpha phi u = 0` with Neumann ends, located
/// as the couplings where the inertia of the dense finite-difference pencil
/// changes. Tangential touchings (no inertia change) are invisible here.
pub fn neumann_pencil_roots<F: Fn(f64) -> f64>(
    phi: F,
    window: (f64, f64),
    scan_step: f64,
    n: usize,
    tol: f64,
) -> Vec<f64> {
    let h = 2.0 / n as f64;
    let pv: Vec<f64> = (0..n)
        .map(|i| phi(-1.0 + (i as f64 + 0.5) * h))
        .collect();
    let count = |alpha: f64| pencil_negative_count(&pv, h, alpha);

    let mut roots = Vec::new();
    let mut a = window.0;
    let mut ca = count(a);
    while a < window.1 - 1e-12 {
        let b = (a + scan_step).min(window.1);
        let cb = count(b);
        if cb != ca {
            let (mut lo, mut hi, mut clo) = (a, b, ca);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count(mid) != clo {
                    hi = mid;
                } else {
                    lo = mid;
                    clo = count(mid);
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        ca = cb;
    }
    roots
}

fn complex_thomas(
    diag: &mut [Complex64],
    off: f64,
    rhs: &mut [Complex64],
) -> Vec<Complex64> {
    let n = diag.len();
    for i in 1..n {
        let m = off / diag[i - 1];
        diag[i] -= m * off;
        let prev = rhs[i - 1];
        rhs[i] -= m * prev;
    }
    let mut ys = vec![Complex64::ZERO; n];
    ys[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        ys[i] = (rhs[i] - off * ys[i + 1]) / diag[i];
    }
    ys
}

fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

/// Cell average of a piecewise-constant right-hand side.
fn cell_avg(segs: &[(f64, f64, f64)], x: f64, h: f64) -> f64 {
    segs.iter()
        .map(|&(a, b, c)| c * overlap(x - 0.5 * h, x + 0.5 * h, a, b))
        .sum::<f64>()
        / h
}

/// Dense finite-difference resolvent of the limit operator: a Dirichlet
/// particular solution on each half line plus a homogeneous lift fitted to
/// the origin conditions, all on vertex grids of step `h` over `[-l, l]`.
/// `op = Some((mu, nu))` selects the resonant coupling, `None` the split.
/// Returns the solution at the points `at` (which must be grid vertices).
pub fn fd_limit_resolvent(
    f_segs: &[(f64, f64, f64)],
    zeta: Complex64,
    op: Option<(f64, f64)>,
    l: f64,
    h: f64,
    at: &[f64],
) -> Vec<Complex64> {
    let n = (l / h).round() as usize;
    let h = l / n as f64;
    let inv_h2 = 1.0 / (h * h);

    // interior solve with Dirichlet ends; returns the full vertex array
    // including the boundary values (left_end, right_end)
    let solve = |xs: &dyn Fn(usize) -> f64,
                 rhs_at: &dyn Fn(f64) -> Complex64,
                 left: Complex64,
                 right: Complex64| {
        let mut diag = vec![Complex64::new(2.0 * inv_h2, 0.0) - zeta; n - 1];
        let mut rhs: Vec<Complex64> = (1..n).map(|j| rhs_at(xs(j))).collect();
        rhs[0] += inv_h2 * left;
        rhs[n - 2] += inv_h2 * right;
        let inner = complex_thomas(&mut diag, -inv_h2, &mut rhs);
        let mut full = Vec::with_capacity(n + 1);
        full.push(left);
        full.extend(inner);
        full.push(right);
        full
    };

    let x_left = |j: usize| -l + j as f64 * h;
    let x_right = |j: usize| j as f64 * h;
    let fc = |x: f64| Complex64::new(cell_avg(f_segs, x, h), 0.0);
    let zero = Complex64::ZERO;
    let one = Complex64::new(1.0, 0.0);

    // split particular solutions: y(-l) = y(0-) = 0 and y(0+) = y(l) = 0
    let yl = solve(&x_left, &fc, zero, zero);
    let yr = solve(&x_right, &fc, zero, zero);

    let (a_coef, b_coef, gl, gr) = match op {
        None => (zero, zero, Vec::new(), Vec::new()),
        Some((mu, nu)) => {
            // homogeneous lifts with unit value at the origin
            let gl = solve(&x_left, &|_| zero, zero, one);
            let gr = solve(&x_right, &|_| zero, one, zero);
            // one-sided second-order derivatives at the origin
            let dm = |v: &[Complex64]| (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
            let dp = |v: &[Complex64]| (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
            // with y = yl + A gl on the left and y = yr + B gr on the right:
            //   y(-0) = A, y(+0) = B = mu A
            //   dp(yr) + B dp(gr) = (dm(yl) + A dm(gl)) / mu + nu A
            let coef = mu * dp(&gr) - dm(&gl) / mu - nu;
            let rhs = dm(&yl) / mu - dp(&yr);
            let a = rhs / coef;
            (a, mu * a, gl, gr)
        }
    };

    at.iter()
        .map(|&x| {
            if x < 0.0 {
                let j = ((x + l) / h).round() as usize;
                yl[j] + if gl.is_empty() { zero } else { a_coef * gl[j] }
            } else {
                let j = (x / h).round() as usize;
                yr[j] + if gr.is_empty() { zero } else { b_coef * gr[j] }
            }
        })
        .collect()
}

/// Free-line resolvent by Green-kernel quadrature:
/// `y(x) = int i e^{i omega |x - t|} / (2 omega) f(t) dt` with closed-form
/// piece integrals for piecewise-constant `f`.
pub fn green_free(f_segs: &[(f64, f64, f64)], zeta: Complex64, x: f64) -> Complex64 {
    let omega = {
        let w = zeta.sqrt();
        if w.im < 0.0 {
            -w
        } else {
            w
        }
    };
    let iom = Complex64::i() * omega;
    let mut acc = Complex64::ZERO;
    for &(a, b, c) in f_segs {
        let m = b.min(x);
        if m > a {
            // t < x: e^{i omega (x - t)}
            acc += c * (iom * x).exp() * ((-iom * a).exp() - (-iom * m).exp()) / iom;
        }
        let m = a.max(x);
        if b > m {
            // t > x: e^{i omega (t - x)}
            acc += c * (-iom * x).exp() * ((iom * b).exp() - (iom * m).exp()) / iom;
        }
    }
    Complex64::i() / (2.0 * omega) * acc
}

/// Random piecewise-constant shape on `[-1, 1]` with its raw description.
pub fn random_pw_const(
    rng: &mut ChaCha8Rng,
    label: &str,
    max_pieces: usize,
    max_amp: f64,
) -> (Vec<(f64, f64, f64)>, ShapePotential) {
    let n = rng.gen_range(1..=max_pieces);
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut segs = Vec::with_capacity(n);
    let mut a = -1.0;
    for (i, w) in weights.iter().enumerate() {
        let b = if i == n - 1 { 1.0 } else { a + 2.0 * w / total };
        let c = rng.gen_range(-max_amp..=max_amp);
        segs.push((a, b, c));
        a = b;
    }
    let pieces = segs
        .iter()
        .map(|&(a, b, c)| Piece::new(a, b, vec![c]))
        .collect();
    let shape = ShapePotential::new(label, pieces).expect("generated shape is valid");
    (segs, shape)
}
