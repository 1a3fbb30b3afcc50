//! Scattering by the squeezed potential and by its zero-range limit.
//!
//! For an incoming wave `e^{ikx}` from the left, the reflection and
//! transmission coefficients at finite `eps` follow from the fundamental
//! pair on the support by Cramer's rule. As `eps -> 0` they converge to the
//! coefficients of the limit point interaction: a two-parameter coupling at
//! resonant `alpha`, total reflection otherwise.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ode::{fundamental_pair, fundamental_solves, FundamentalPair, SolverSettings};
use crate::potential::ShapePotential;
use crate::quad::{composite_gauss16, fit_log_order, merge_breakpoints, refine_panels, tail_decreasing};
use crate::resonance::{resonance_record, shooting_residual, ResonanceRecord};
use crate::{Error, Result};

/// Denominators below this magnitude are treated as poles.
const DENOMINATOR_FLOOR: f64 = 1e-14;
/// Longest quadrature panel for the boundary-identity integrals.
const IDENTITY_PANEL: f64 = 0.25;

/// Reflection and transmission coefficients of the squeezed potential.
#[derive(Debug, Clone, Copy)]
pub struct ScatteringData {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub k: f64,
    pub r: Complex64,
    pub t: Complex64,
}

impl ScatteringData {
    /// `| |R|^2 + |T|^2 - 1 |`; zero for a real potential in exact arithmetic.
    pub fn unitarity_defect(&self) -> f64 {
        (self.r.norm_sqr() + self.t.norm_sqr() - 1.0).abs()
    }

    pub fn transmission_probability(&self) -> f64 {
        self.t.norm_sqr()
    }
}

/// The two numbers a resonant coupling feeds into the limit model.
#[derive(Debug, Clone, Copy)]
pub struct ResonantCoupling {
    pub alpha: f64,
    pub theta: f64,
    pub kappa: f64,
}

impl ResonantCoupling {
    pub fn new(alpha: f64, theta: f64, kappa: f64) -> Result<Self> {
        if !alpha.is_finite() || !theta.is_finite() || !kappa.is_finite() {
            return Err(Error::InvalidInput("non-finite coupling data".into()));
        }
        if theta == 0.0 {
            return Err(Error::InvalidInput(
                "resonant coupling requires theta != 0".into(),
            ));
        }
        Ok(Self { alpha, theta, kappa })
    }
}

impl From<&ResonanceRecord> for ResonantCoupling {
    fn from(rec: &ResonanceRecord) -> Self {
        Self {
            alpha: rec.alpha,
            theta: rec.theta,
            kappa: rec.kappa,
        }
    }
}

/// Scattering coefficients of the limit point interaction.
#[derive(Debug, Clone, Copy)]
pub struct LimitScattering {
    pub k: f64,
    /// Coupling the limit was taken at; `None` for the generic non-resonant case.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub resonant: bool,
    pub r: Complex64,
    pub t: Complex64,
}

impl LimitScattering {
    pub fn transmission_probability(&self) -> f64 {
        self.t.norm_sqr()
    }
}

fn require_positive_k(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidInput(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    Ok(())
}

/// Coefficients from an already computed fundamental pair.
pub fn scatter_from_pair(pair: &FundamentalPair) -> Result<ScatteringData> {
    let ek = pair.eps * pair.k;
    let denom = Complex64::new(
        pair.du1 - ek * ek * pair.v1,
        -ek * (pair.u1 + pair.dv1),
    );
    if denom.norm() < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator {
            magnitude: denom.norm(),
        });
    }
    let numer = Complex64::new(
        pair.du1 + ek * ek * pair.v1,
        -ek * (pair.u1 - pair.dv1),
    );
    let phase = Complex64::from_polar(1.0, -2.0 * ek);
    Ok(ScatteringData {
        alpha: pair.alpha,
        beta: pair.beta,
        eps: pair.eps,
        k: pair.k,
        r: -phase * numer / denom,
        t: -phase * Complex64::new(0.0, 2.0 * ek) / denom,
    })
}

/// Reflection and transmission of `V_eps` for a left-incident wave.
pub fn scatter_finite(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    beta: f64,
    eps: f64,
    k: f64,
    settings: &SolverSettings,
) -> Result<ScatteringData> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "eps must be positive, got {eps}"
        )));
    }
    require_positive_k(k)?;
    let pair = fundamental_pair(phi, psi, alpha, beta, eps, k, settings)?;
    scatter_from_pair(&pair)
}

/// Right-incidence convenience wrapper: scatter off the reflected shapes.
pub fn scatter_finite_right(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    beta: f64,
    eps: f64,
    k: f64,
    settings: &SolverSettings,
) -> Result<ScatteringData> {
    scatter_finite(&phi.reflected(), &psi.reflected(), alpha, beta, eps, k, settings)
}

/// Limit coefficients: the resonant two-parameter family, or the split
/// (total reflection) values for non-resonant couplings.
pub fn scatter_limit(
    coupling: Option<ResonantCoupling>,
    beta: f64,
    k: f64,
) -> Result<LimitScattering> {
    require_positive_k(k)?;
    if !beta.is_finite() {
        return Err(Error::InvalidInput("beta must be finite".into()));
    }
    match coupling {
        None => Ok(LimitScattering {
            k,
            alpha: None,
            beta,
            resonant: false,
            r: Complex64::new(-1.0, 0.0),
            t: Complex64::new(0.0, 0.0),
        }),
        Some(c) => {
            let sum = 1.0 / c.theta + c.theta;
            let diff = 1.0 / c.theta - c.theta;
            let bk = beta * c.kappa;
            let denom = Complex64::new(-bk, k * sum);
            Ok(LimitScattering {
                k,
                alpha: Some(c.alpha),
                beta,
                resonant: true,
                r: Complex64::new(bk, k * diff) / denom,
                t: Complex64::new(0.0, 2.0 * k) / denom,
            })
        }
    }
}

/// Closed-form `|T|^2 = 4k^2 / (k^2 (theta^{-1} + theta)^2 + beta^2 kappa^2)`.
pub fn transmission_probability(coupling: &ResonantCoupling, beta: f64, k: f64) -> f64 {
    let sum = 1.0 / coupling.theta + coupling.theta;
    let bk = beta * coupling.kappa;
    4.0 * k * k / (k * k * sum * sum + bk * bk)
}

/// One `scatter_finite` per grid coupling, evaluated in parallel, output in
/// grid order.
pub fn sweep_alpha(
    phi: &ShapePotential,
    psi: &ShapePotential,
    beta: f64,
    eps: f64,
    k: f64,
    alphas: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<ScatteringData>> {
    alphas
        .par_iter()
        .map(|&a| scatter_finite(phi, psi, a, beta, eps, k, settings))
        .collect()
}

/// Options for the convergence studies.
#[derive(Debug, Clone)]
pub struct ConvergenceOptions {
    pub settings: SolverSettings,
    /// Couplings with `|shooting residual| <= resonance_tol` take the
    /// resonant limit branch.
    pub resonance_tol: f64,
    /// Errors at or below this value count as converged when policing
    /// monotone decrease and fitting rates.
    pub noise_floor: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            settings: SolverSettings::default(),
            resonance_tol: 1e-8,
            noise_floor: 1e-12,
        }
    }
}

/// Scattering errors at one squeeze width.
#[derive(Debug, Clone, Copy)]
pub struct ConvergencePoint {
    pub eps: f64,
    pub err_r: f64,
    pub err_t: f64,
    /// `u'(1)/eps`, which approaches `beta kappa` at resonant couplings.
    pub uprime_over_eps: Option<f64>,
    /// `|u'(1)/eps - beta kappa|`.
    pub asymp_defect: Option<f64>,
    /// Residual of the exact boundary identity
    /// `theta u'(1) = eps beta int(Psi u_eps u) - (eps k)^2 int(u_eps u)`.
    pub identity_defect: Option<f64>,
}

/// Report of `|R_eps - R|` and `|T_eps - T|` against the limit model.
#[derive(Debug, Clone)]
pub struct ScatteringRateReport {
    pub resonant: bool,
    pub limit: LimitScattering,
    pub points: Vec<ConvergencePoint>,
    pub order_r: Option<f64>,
    pub order_t: Option<f64>,
    /// Fit through the summed error, robust when one coefficient sits at
    /// the noise floor.
    pub order: Option<f64>,
}

/// Drive `eps` through `eps_list` and compare with `scatter_limit`.
///
/// At resonant couplings the report also tracks the boundary derivative
/// asymptotics of the interacting solution.
pub fn scattering_convergence(
    phi: &ShapePotential,
    psi: &ShapePotential,
    alpha: f64,
    beta: f64,
    k: f64,
    eps_list: &[f64],
    opts: &ConvergenceOptions,
) -> Result<ScatteringRateReport> {
    require_positive_k(k)?;
    validate_eps_list(eps_list)?;
    if !(opts.resonance_tol > 0.0) || !(opts.noise_floor >= 0.0) {
        return Err(Error::InvalidInput(
            "resonance_tol must be positive and noise_floor nonnegative".into(),
        ));
    }

    let residual = shooting_residual(phi, alpha, &opts.settings)?;
    let record = if residual.abs() <= opts.resonance_tol {
        Some(resonance_record(
            phi,
            psi,
            alpha,
            opts.resonance_tol,
            &opts.settings,
        )?)
    } else {
        None
    };
    let limit = scatter_limit(record.as_ref().map(ResonantCoupling::from), beta, k)?;

    let identity_breaks = refine_panels(
        &merge_breakpoints(
            &merge_breakpoints(&phi.breakpoints(), &psi.breakpoints()),
            &[-1.0, 1.0],
        ),
        IDENTITY_PANEL,
    );

    let mut points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let solves = fundamental_solves(phi, psi, alpha, beta, eps, k, &opts.settings)?;
        let data = scatter_from_pair(&solves.pair)?;
        let (uprime_over_eps, asymp_defect, identity_defect) = match &record {
            None => (None, None, None),
            Some(rec) => {
                let u_eps = &solves.u.trace;
                let u0 = &rec.half_bound_trace;
                let int_psi = composite_gauss16(
                    |s| psi.evaluate(s) * u_eps.eval(s) * u0.eval(s),
                    &identity_breaks,
                );
                let int_plain =
                    composite_gauss16(|s| u_eps.eval(s) * u0.eval(s), &identity_breaks);
                let du1 = solves.pair.du1;
                let rhs = eps * beta * int_psi - (eps * k) * (eps * k) * int_plain;
                (
                    Some(du1 / eps),
                    Some((du1 / eps - beta * rec.kappa).abs()),
                    Some((rec.theta * du1 - rhs).abs()),
                )
            }
        };
        points.push(ConvergencePoint {
            eps,
            err_r: (data.r - limit.r).norm(),
            err_t: (data.t - limit.t).norm(),
            uprime_over_eps,
            asymp_defect,
            identity_defect,
        });
    }

    let errs_r: Vec<f64> = points.iter().map(|p| p.err_r).collect();
    let errs_t: Vec<f64> = points.iter().map(|p| p.err_t).collect();
    let sums: Vec<f64> = points.iter().map(|p| p.err_r + p.err_t).collect();
    if !tail_decreasing(&errs_r, opts.noise_floor) {
        return Err(Error::NotConverged {
            context: "reflection errors do not decrease over the last three eps".into(),
        });
    }
    if !tail_decreasing(&errs_t, opts.noise_floor) {
        return Err(Error::NotConverged {
            context: "transmission errors do not decrease over the last three eps".into(),
        });
    }

    Ok(ScatteringRateReport {
        resonant: record.is_some(),
        limit,
        order_r: fit_log_order(eps_list, &errs_r, opts.noise_floor),
        order_t: fit_log_order(eps_list, &errs_t, opts.noise_floor),
        order: fit_log_order(eps_list, &sums, opts.noise_floor),
        points,
    })
}

pub(crate) fn validate_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::InvalidInput("eps list is empty".into()));
    }
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidInput(
                "eps list must be strictly decreasing".into(),
            ));
        }
    }
    if !eps_list.iter().all(|&e| e > 0.0 && e.is_finite()) {
        return Err(Error::InvalidInput("eps values must be positive".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Piece;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn zero() -> ShapePotential {
        ShapePotential::zero()
    }

    fn half_box() -> ShapePotential {
        ShapePotential::constant("half box", 0.5)
    }

    fn well() -> ShapePotential {
        ShapePotential::constant("well", -1.0)
    }

    fn dprime() -> ShapePotential {
        ShapePotential::new("dprime", vec![Piece::new(-1.0, 1.0, vec![0.0, -1.5])]).unwrap()
    }

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn free_particle_is_transparent() {
        let d = scatter_finite(&zero(), &zero(), 0.0, 0.0, 0.5, 0.7, &settings()).unwrap();
        assert!(d.r.norm() <= 1e-12);
        assert!((d.t - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
        assert!(d.unitarity_defect() <= 1e-12);
    }

    #[test]
    fn delta_case_matches_closed_form() {
        // alpha = 0, beta = 2, Psi = 1/2 box: the eps-potential is a squeezed
        // delta of strength 2; frozen reference from the two-piece closed form.
        let d = scatter_finite(&zero(), &half_box(), 0.0, 2.0, 1e-3, 1.0, &settings()).unwrap();
        assert_abs_diff_eq!(d.r.re, -0.5003332888062374, epsilon = 1e-12);
        assert_abs_diff_eq!(d.r.im, -0.49999955571857174, epsilon = 1e-12);
        assert_abs_diff_eq!(d.t.re, 0.49966671119354017, epsilon = 1e-12);
        assert_abs_diff_eq!(d.t.im, -0.5000002221185464, epsilon = 1e-12);
        assert_abs_diff_eq!(
            d.transmission_probability(),
            0.49966704439356446,
            epsilon = 1e-12
        );
        assert!(d.unitarity_defect() <= 1e-13);
    }

    #[test]
    fn non_resonant_well_is_nearly_opaque() {
        let d = scatter_finite(&well(), &zero(), 1.0, 0.0, 0.01, 1.0, &settings()).unwrap();
        assert_abs_diff_eq!(
            d.transmission_probability(),
            4.836388254783492e-4,
            epsilon = 1e-15
        );
        assert!(d.transmission_probability() <= 0.05);
        assert!(d.unitarity_defect() <= 1e-13);
    }

    #[test]
    fn reciprocity_of_transmission_under_reflection() {
        let left = scatter_finite(&dprime(), &half_box(), 3.0, 0.7, 0.05, 1.3, &settings())
            .unwrap();
        let right = scatter_finite_right(&dprime(), &half_box(), 3.0, 0.7, 0.05, 1.3, &settings())
            .unwrap();
        assert!((left.t - right.t).norm() <= 1e-9);
        assert_abs_diff_eq!(left.r.norm(), right.r.norm(), epsilon = 1e-9);
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        let err = scatter_finite(&zero(), &zero(), 0.0, 0.0, 1e-8, 1e-8, &settings()).unwrap_err();
        assert!(matches!(err, Error::DegenerateDenominator { .. }));
        assert!(!err.is_validation());
    }

    #[test]
    fn input_validation() {
        assert!(scatter_finite(&zero(), &zero(), 0.0, 0.0, 0.0, 1.0, &settings()).is_err());
        assert!(scatter_finite(&zero(), &zero(), 0.0, 0.0, 0.1, 0.0, &settings()).is_err());
        assert!(scatter_finite(&zero(), &zero(), 0.0, 0.0, 0.1, -1.0, &settings()).is_err());
        assert!(scatter_limit(None, f64::NAN, 1.0).is_err());
        assert!(ResonantCoupling::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn limit_examples() {
        let free = scatter_limit(Some(ResonantCoupling::new(0.0, 1.0, 1.0).unwrap()), 0.0, 1.0)
            .unwrap();
        assert!(free.r.norm() <= 1e-15);
        assert!((free.t - Complex64::new(1.0, 0.0)).norm() <= 1e-15);

        let delta = scatter_limit(Some(ResonantCoupling::new(0.0, 1.0, 1.0).unwrap()), 2.0, 1.0)
            .unwrap();
        assert_abs_diff_eq!(delta.r.re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(delta.r.im, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(delta.t.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(delta.t.im, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(delta.transmission_probability(), 0.5, epsilon = 1e-15);

        let split = scatter_limit(None, 3.0, 2.0).unwrap();
        assert!(!split.resonant);
        assert_eq!(split.r, Complex64::new(-1.0, 0.0));
        assert_eq!(split.t, Complex64::new(0.0, 0.0));
        assert_eq!(split.alpha, None);
    }

    #[test]
    fn transmission_probability_closed_form() {
        let c = ResonantCoupling::new(0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(transmission_probability(&c, 2.0, 1.0), 0.5, epsilon = 1e-15);

        // transparent family: |theta| = 1, kappa = 0
        let c = ResonantCoupling::new(1.0, -1.0, 0.0).unwrap();
        for k in [0.5, 1.0, 2.0, 5.0] {
            assert_abs_diff_eq!(transmission_probability(&c, 7.3, k), 1.0, epsilon = 1e-15);
            let ls = scatter_limit(Some(c), 7.3, k).unwrap();
            assert_abs_diff_eq!(ls.transmission_probability(), 1.0, epsilon = 1e-14);
        }

        // beta = 0: k-independent value 4 / (theta + 1/theta)^2
        let c = ResonantCoupling::new(1.0, 3.0, 0.4).unwrap();
        let want = 4.0 / (3.0 + 1.0 / 3.0) / (3.0 + 1.0 / 3.0);
        for k in [0.5, 1.0, 2.0, 5.0] {
            assert_abs_diff_eq!(transmission_probability(&c, 0.0, k), want, epsilon = 1e-15);
            let ls = scatter_limit(Some(c), 0.0, k).unwrap();
            assert_abs_diff_eq!(ls.transmission_probability(), want, epsilon = 1e-14);
        }
    }

    #[test]
    fn limit_matches_closed_probability_generically() {
        let c = ResonantCoupling::new(2.0, -1.7, 0.9).unwrap();
        let ls = scatter_limit(Some(c), 1.3, 0.8).unwrap();
        assert_abs_diff_eq!(
            ls.transmission_probability(),
            transmission_probability(&c, 1.3, 0.8),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(ls.r.norm_sqr() + ls.t.norm_sqr(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sweep_preserves_grid_order() {
        let grid = [0.0, 1.0, 2.4674011002723395, 4.0];
        let rows = sweep_alpha(&well(), &half_box(), 1.0, 0.01, 1.0, &grid, &settings()).unwrap();
        assert_eq!(rows.len(), grid.len());
        for (row, &a) in rows.iter().zip(&grid) {
            assert_eq!(row.alpha, a);
            assert!(row.unitarity_defect() <= 1e-10);
        }
        // the resonant grid point transmits far better than its neighbors
        assert!(rows[2].transmission_probability() > 0.5);
        assert!(rows[1].transmission_probability() < 0.05);
    }

    #[test]
    fn convergence_in_the_free_case() {
        let report = scattering_convergence(
            &zero(),
            &zero(),
            0.0,
            0.0,
            1.0,
            &[0.5, 0.25, 0.125],
            &ConvergenceOptions::default(),
        )
        .unwrap();
        assert!(report.resonant);
        for p in &report.points {
            assert!(p.err_r <= 1e-10);
            assert!(p.err_t <= 1e-10);
        }
        // everything sits at the noise floor: no rate to fit
        assert!(report.order.is_none());
    }

    #[test]
    fn convergence_delta_case_is_first_order() {
        let eps_list: Vec<f64> = (3..=9).map(|j| 0.5f64.powi(j)).collect();
        let report = scattering_convergence(
            &zero(),
            &half_box(),
            0.0,
            2.0,
            1.0,
            &eps_list,
            &ConvergenceOptions::default(),
        )
        .unwrap();
        assert!(report.resonant);
        assert_abs_diff_eq!(report.limit.r.re, -0.5, epsilon = 1e-12);
        let order = report.order.unwrap();
        assert!((0.8..=1.2).contains(&order), "order = {order}");
        for w in report.points.windows(2) {
            assert!(w[1].err_r < w[0].err_r);
            assert!(w[1].err_t < w[0].err_t);
            assert!(w[1].asymp_defect.unwrap() < w[0].asymp_defect.unwrap());
        }
        for p in &report.points {
            assert!(p.identity_defect.unwrap() <= 1e-10);
            // u'(1)/eps approaches beta kappa = 2
            assert_abs_diff_eq!(p.uprime_over_eps.unwrap(), 2.0, epsilon = 0.2);
        }
    }

    #[test]
    fn convergence_non_resonant_reports_total_reflection() {
        let eps_list: Vec<f64> = (3..=7).map(|j| 0.5f64.powi(j)).collect();
        let report = scattering_convergence(
            &well(),
            &zero(),
            1.0,
            0.0,
            1.0,
            &eps_list,
            &ConvergenceOptions::default(),
        )
        .unwrap();
        assert!(!report.resonant);
        assert_eq!(report.limit.r, Complex64::new(-1.0, 0.0));
        let order = report.order.unwrap();
        assert!((0.8..=1.2).contains(&order), "order = {order}");
        assert!(report.points.iter().all(|p| p.uprime_over_eps.is_none()));
    }

    #[test]
    fn convergence_resonant_well_reaches_limit() {
        let alpha = (PI / 2.0) * (PI / 2.0);
        let eps_list: Vec<f64> = (3..=8).map(|j| 0.5f64.powi(j)).collect();
        let report = scattering_convergence(
            &well(),
            &half_box(),
            alpha,
            1.0,
            1.0,
            &eps_list,
            &ConvergenceOptions::default(),
        )
        .unwrap();
        assert!(report.resonant);
        // theta = -1, kappa = -1/2: |T|^2 = 4 / (4 + 1/4)
        assert_abs_diff_eq!(
            report.limit.transmission_probability(),
            16.0 / 17.0,
            epsilon = 1e-9
        );
        let last = report.points.last().unwrap();
        assert!(last.err_r < 2e-2);
        assert!(last.err_t < 2e-2);
        // u'(1)/eps -> beta kappa = -1/2
        assert_abs_diff_eq!(last.uprime_over_eps.unwrap(), -0.5, epsilon = 0.05);
        assert!(last.identity_defect.unwrap() <= 1e-9);
    }

    #[test]
    fn eps_list_validation() {
        let opts = ConvergenceOptions::default();
        for bad in [
            vec![],
            vec![0.1, 0.1],
            vec![0.1, 0.2],
            vec![0.1, -0.05],
        ] {
            assert!(
                scattering_convergence(&zero(), &zero(), 0.0, 0.0, 1.0, &bad, &opts).is_err()
            );
        }
    }
}
