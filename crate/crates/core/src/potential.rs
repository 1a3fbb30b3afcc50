//! Piecewise polynomial shapes and the squeezed potentials they generate.
//!
//! A shape is a finite list of polynomial pieces supported inside `[-1, 1]`.
//! Two shapes `(phi, psi)` together with couplings `(alpha, beta)` define the
//! squeezed potential
//!
//! ```text
//! V_eps(x) = alpha eps^-2 phi(x/eps) + beta eps^-1 psi(x/eps),
//! ```
//!
//! which vanishes for `|x| > eps`. Moments of the shapes decide which
//! distributional object the potential resembles as `eps -> 0`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest polynomial degree accepted per piece.
pub const MAX_DEGREE: usize = 8;

/// Default tolerance for the moment classification.
pub const DEFAULT_MOMENT_TOL: f64 = 1e-10;

/// One polynomial piece: ascending coefficients `c0 + c1 s + ...` on `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub interval: [f64; 2],
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn new(a: f64, b: f64, coeffs: Vec<f64>) -> Self {
        Piece { interval: [a, b], coeffs }
    }

    pub fn eval(&self, s: f64) -> f64 {
        poly_eval(&self.coeffs, s)
    }

    /// Exact integral of the polynomial over the piece.
    pub fn integral(&self) -> f64 {
        self.integral_on(self.interval[0], self.interval[1])
    }

    /// Exact integral over the overlap of `[lo, hi]` with the piece.
    pub fn integral_on(&self, lo: f64, hi: f64) -> f64 {
        let a = lo.max(self.interval[0]);
        let b = hi.min(self.interval[1]);
        if b <= a {
            return 0.0;
        }
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate() {
            acc += c * (powi(b, j + 1) - powi(a, j + 1)) / (j as f64 + 1.0);
        }
        acc
    }

    /// Exact integral of `s * p(s)` over the piece.
    pub fn first_moment(&self) -> f64 {
        let [a, b] = self.interval;
        let mut acc = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate() {
            acc += c * (powi(b, j + 2) - powi(a, j + 2)) / (j as f64 + 2.0);
        }
        acc
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn validate(&self) -> Result<()> {
        let [a, b] = self.interval;
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::InvalidShape(format!(
                "piece interval [{a}, {b}] is not a proper interval"
            )));
        }
        if self.coeffs.is_empty() || self.coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::InvalidShape(format!(
                "piece must have 1..={} coefficients, got {}",
                MAX_DEGREE + 1,
                self.coeffs.len()
            )));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidShape("non-finite coefficient".into()));
        }
        Ok(())
    }
}

pub(crate) fn poly_eval(coeffs: &[f64], s: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * s + c;
    }
    acc
}

fn powi(x: f64, n: usize) -> f64 {
    x.powi(n as i32)
}

fn sort_and_check(pieces: &mut [Piece]) -> Result<()> {
    for p in pieces.iter() {
        p.validate()?;
    }
    pieces.sort_by(|p, q| p.interval[0].total_cmp(&q.interval[0]));
    for w in pieces.windows(2) {
        if w[0].interval[1] > w[1].interval[0] {
            return Err(Error::InvalidShape(format!(
                "pieces [{}, {}] and [{}, {}] overlap",
                w[0].interval[0], w[0].interval[1], w[1].interval[0], w[1].interval[1]
            )));
        }
    }
    Ok(())
}

fn pieces_eval(pieces: &[Piece], s: f64) -> f64 {
    for p in pieces {
        if s >= p.interval[0] && s < p.interval[1] {
            return p.eval(s);
        }
    }
    // A right endpoint that no later piece reopens keeps its closing value.
    for p in pieces {
        if s == p.interval[1] {
            return p.eval(s);
        }
    }
    0.0
}

fn pieces_breakpoints(pieces: &[Piece]) -> Vec<f64> {
    let mut b: Vec<f64> = pieces
        .iter()
        .flat_map(|p| p.interval.iter().copied())
        .collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

#[derive(Serialize, Deserialize)]
struct RawShape {
    #[serde(default)]
    label: String,
    pieces: Vec<Piece>,
}

/// A shape supported in `[-1, 1]`: polynomial pieces with disjoint interiors,
/// zero in gaps and outside the support, right-continuous at shared breakpoints.
#[derive(Debug, Clone, Serialize)]
pub struct ShapePotential {
    pub label: String,
    pieces: Vec<Piece>,
}

impl ShapePotential {
    pub fn new(label: impl Into<String>, mut pieces: Vec<Piece>) -> Result<Self> {
        sort_and_check(&mut pieces)?;
        for p in &pieces {
            if p.interval[0] < -1.0 || p.interval[1] > 1.0 {
                return Err(Error::InvalidShape(format!(
                    "piece [{}, {}] leaves [-1, 1]",
                    p.interval[0], p.interval[1]
                )));
            }
        }
        Ok(ShapePotential { label: label.into(), pieces })
    }

    /// The identically zero shape.
    pub fn zero() -> Self {
        ShapePotential { label: "zero".into(), pieces: Vec::new() }
    }

    /// Constant value `c` on all of `[-1, 1]`.
    pub fn constant(label: impl Into<String>, c: f64) -> Self {
        ShapePotential {
            label: label.into(),
            pieces: vec![Piece::new(-1.0, 1.0, vec![c])],
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(Piece::is_zero)
    }

    /// Sorted distinct piece endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        pieces_breakpoints(&self.pieces)
    }

    /// Coefficients of the piece whose half-open interval `[a, b)` contains `s`.
    pub(crate) fn piece_coeffs_at(&self, s: f64) -> Option<&[f64]> {
        self.pieces
            .iter()
            .find(|p| s >= p.interval[0] && s < p.interval[1])
            .map(|p| p.coeffs.as_slice())
    }

    /// Value at `s`; zero outside `[-1, 1]` and in gaps between pieces.
    pub fn evaluate(&self, s: f64) -> f64 {
        if !(-1.0..=1.0).contains(&s) {
            return 0.0;
        }
        pieces_eval(&self.pieces, s)
    }

    /// Exact `(m0, m1) = (integral of phi, integral of s phi)`.
    pub fn moments(&self) -> (f64, f64) {
        let m0 = self.pieces.iter().map(Piece::integral).sum();
        let m1 = self.pieces.iter().map(Piece::first_moment).sum();
        (m0, m1)
    }

    /// Exact integral over `[lo, hi]`.
    pub fn integral_on(&self, lo: f64, hi: f64) -> f64 {
        self.pieces.iter().map(|p| p.integral_on(lo, hi)).sum()
    }

    /// The shape `s -> phi(-s)`.
    pub fn reflected(&self) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let coeffs = p
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| if j % 2 == 0 { c } else { -c })
                    .collect();
                Piece::new(-p.interval[1], -p.interval[0], coeffs)
            })
            .collect();
        ShapePotential::new(format!("{} (reflected)", self.label), pieces)
            .expect("reflection preserves validity")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawShape = serde_json::from_str(text)
            .map_err(|e| Error::InvalidShape(format!("bad shape JSON: {e}")))?;
        ShapePotential::new(raw.label, raw.pieces)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::InvalidShape(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&text)
    }
}

/// A piecewise polynomial on arbitrary finite intervals (used for resolvent
/// right-hand sides). Same piece format as [`ShapePotential`] but without the
/// `[-1, 1]` support restriction.
#[derive(Debug, Clone, Serialize)]
pub struct PiecewisePoly {
    pub label: String,
    pieces: Vec<Piece>,
}

impl PiecewisePoly {
    pub fn new(label: impl Into<String>, mut pieces: Vec<Piece>) -> Result<Self> {
        sort_and_check(&mut pieces)?;
        Ok(PiecewisePoly { label: label.into(), pieces })
    }

    /// Constant value `c` on `[a, b]`.
    pub fn boxcar(a: f64, b: f64, c: f64) -> Result<Self> {
        PiecewisePoly::new(format!("box[{a},{b}]"), vec![Piece::new(a, b, vec![c])])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(Piece::is_zero)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        pieces_eval(&self.pieces, x)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        pieces_breakpoints(&self.pieces)
    }

    /// Smallest interval containing the support, or `None` when empty.
    pub fn support(&self) -> Option<(f64, f64)> {
        let b = self.breakpoints();
        match (b.first(), b.last()) {
            (Some(&lo), Some(&hi)) => Some((lo, hi)),
            _ => None,
        }
    }

    pub fn integral_on(&self, lo: f64, hi: f64) -> f64 {
        self.pieces.iter().map(|p| p.integral_on(lo, hi)).sum()
    }

    /// Exact L2 norm, `sqrt(integral of f^2)`.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for p in &self.pieces {
            let sq = poly_mul(&p.coeffs, &p.coeffs);
            acc += Piece::new(p.interval[0], p.interval[1], sq).integral();
        }
        acc.sqrt()
    }

    /// Upper bound for `max |f|` from a dense sample of each piece.
    pub fn sup_bound(&self) -> f64 {
        let mut m: f64 = 0.0;
        for p in &self.pieces {
            let [a, b] = p.interval;
            for i in 0..=64 {
                let s = a + (b - a) * (i as f64) / 64.0;
                m = m.max(p.eval(s).abs());
            }
        }
        m
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawShape = serde_json::from_str(text)
            .map_err(|e| Error::InvalidShape(format!("bad shape JSON: {e}")))?;
        PiecewisePoly::new(raw.label, raw.pieces)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::InvalidShape(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&text)
    }
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl<'de> Deserialize<'de> for ShapePotential {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = RawShape::deserialize(deserializer)?;
        ShapePotential::new(raw.label, raw.pieces).map_err(serde::de::Error::custom)
    }
}

impl<'de> Deserialize<'de> for PiecewisePoly {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = RawShape::deserialize(deserializer)?;
        PiecewisePoly::new(raw.label, raw.pieces).map_err(serde::de::Error::custom)
    }
}

/// Which distributional object `V_eps` resembles as `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// `m0(phi) = 0`, `m1(phi) = -1`, `m0(psi) = 1`: a delta-prime plus delta pair.
    DeltaPrimeDeltaLimit,
    /// `m0(phi) != 0`: the `eps^-2` part has no distributional limit.
    DivergentInDistributions,
    /// Converges weakly but not to the normalized delta-prime plus delta pair.
    OtherWeakLimit,
}

/// Shape moments and their classification.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub m0_phi: f64,
    pub m1_phi: f64,
    pub m0_psi: f64,
    pub tol: f64,
    pub classification: Classification,
}

/// Exact moments of `(phi, psi)` with the classification at tolerance `tol`.
pub fn moments(phi: &ShapePotential, psi: &ShapePotential, tol: f64) -> Result<MomentReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("moment tolerance must be positive, got {tol}")));
    }
    let (m0_phi, m1_phi) = phi.moments();
    let (m0_psi, _) = psi.moments();
    let classification = if m0_phi.abs() > tol {
        Classification::DivergentInDistributions
    } else if (m1_phi + 1.0).abs() <= tol && (m0_psi - 1.0).abs() <= tol {
        Classification::DeltaPrimeDeltaLimit
    } else {
        Classification::OtherWeakLimit
    };
    Ok(MomentReport { m0_phi, m1_phi, m0_psi, tol, classification })
}

/// Pointwise value of `V_eps(x)`; exactly zero for `|x| > eps`.
pub fn squeezed_value(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    beta: f64,
    eps: f64,
    x: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if x.abs() > eps {
        return Ok(0.0);
    }
    let s = x / eps;
    Ok(alpha / (eps * eps) * phi.evaluate(s) + beta / eps * psi.evaluate(s))
}
