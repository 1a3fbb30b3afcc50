//! Gauss-Legendre quadrature, grids, and small fitting helpers.

use crate::{Error, Result};

/// 16-point Gauss-Legendre nodes on (0, 1] (positive half, mirrored for use).
const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_440_185,
    0.281_603_550_779_258_913_230,
    0.458_016_777_657_227_386_342,
    0.617_876_244_402_643_748_447,
    0.755_404_408_355_003_033_895,
    0.865_631_202_387_831_743_880,
    0.944_575_023_073_232_576_078,
    0.989_400_934_991_649_932_596,
];

const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_496_285,
    0.182_603_415_044_923_588_867,
    0.169_156_519_395_002_538_189,
    0.149_595_988_816_576_732_081,
    0.124_628_971_255_533_872_052,
    0.095_158_511_682_492_784_810,
    0.062_253_523_938_647_892_863,
    0.027_152_459_411_754_094_852,
];

/// 16-point Gauss-Legendre rule on `[a, b]` (exact for degree <= 31).
pub fn gauss16<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        let dx = half * GL16_NODES[i];
        acc += GL16_WEIGHTS[i] * (f(mid - dx) + f(mid + dx));
    }
    acc * half
}

/// Composite 16-point rule over consecutive segments of `breaks`.
pub fn composite_gauss16<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64]) -> f64 {
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            acc += gauss16(&mut f, w[0], w[1]);
        }
    }
    acc
}

/// Evenly spaced grid from `start` to `stop`, endpoints included whenever
/// they land within half a step of the lattice.
pub fn inclusive_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !start.is_finite() || !stop.is_finite() || !step.is_finite() {
        return Err(Error::InvalidInput("grid endpoints must be finite".into()));
    }
    if step <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "grid step must be positive, got {step}"
        )));
    }
    if stop < start {
        return Err(Error::InvalidInput(format!(
            "grid stop {stop} lies before start {start}"
        )));
    }
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let x = start + i as f64 * step;
        if x > stop + 0.5 * step {
            break;
        }
        out.push(x.min(stop));
        i += 1;
    }
    if out.is_empty() {
        out.push(start);
    }
    Ok(out)
}

/// Subdivide panels so none exceeds `max_len`.
pub(crate) fn refine_panels(breaks: &[f64], max_len: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let n = (len / max_len).ceil().max(1.0) as usize;
        for i in 0..n {
            out.push(w[0] + len * i as f64 / n as f64);
        }
    }
    if let Some(&last) = breaks.last() {
        out.push(last);
    }
    out
}

/// Sorted union of two breakpoint lists, without duplicates.
pub fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Least-squares slope of `log err` against `log x`, ignoring entries with
/// `err <= floor`. `None` when fewer than two entries survive.
pub fn fit_log_order(xs: &[f64], errs: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(errs)
        .filter(|(_, &e)| e > floor)
        .map(|(&x, &e)| (x.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// True when the tail of `errs` keeps decreasing, treating values at or below
/// `floor` as converged. Used to police convergence sweeps.
pub fn tail_decreasing(errs: &[f64], floor: f64) -> bool {
    let n = errs.len();
    if n < 3 {
        return true;
    }
    for i in (n - 3)..(n - 1) {
        let (a, b) = (errs[i], errs[i + 1]);
        if b <= floor || a <= floor {
            continue;
        }
        if b > a * (1.0 + 1e-9) {
            return false;
        }
    }
    true
}
