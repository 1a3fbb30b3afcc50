//! `dplab`: command-line front end for the solvable-model library.
//!
//! Emits CSV for grid-valued results and JSON for single-point queries.
//! Exit codes: 0 success, 2 validation error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dplab_core::ode::SolverSettings;
use dplab_core::potential::{moments, PiecewisePoly, ShapePotential};
use dplab_core::quad::inclusive_grid;
use dplab_core::resolvent::{
    resolvent_error, solve_limit_resolvent, ResolventProbe, ResolventRateOptions,
};
use dplab_core::resonance::scan_resonances;
use dplab_core::scattering::{
    scatter_finite, scatter_finite_right, scattering_convergence, sweep_alpha, ConvergenceOptions,
};
use dplab_core::{Error, Result};
use num_complex::Complex64;

#[derive(Parser)]
#[command(name = "dplab", version, about = "Solvable models for squeezed delta'-delta potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Moment report and distributional classification of a shape pair (JSON)
    Moments {
        /// Shape file for Phi
        #[arg(long)]
        phi: PathBuf,
        /// Shape file for Psi (default: identically zero)
        #[arg(long)]
        psi: Option<PathBuf>,
        /// Tolerance for the moment classification
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Output file (default: stdout)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Scan a coupling window for resonances (CSV: alpha,theta,kappa,residual)
    Resonances {
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        psi: Option<PathBuf>,
        /// Scan window as min:max
        #[arg(long, default_value = "-50:50", allow_hyphen_values = true)]
        window: String,
        /// Scan step
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Bisection tolerance on accepted roots
        #[arg(long, default_value_t = 1e-10)]
        root_tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Scattering coefficients at one parameter point (JSON)
    Scatter {
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        k: f64,
        /// Scatter a wave incident from the right instead of the left
        #[arg(long)]
        right: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Transmission sweep over a coupling grid (CSV: alpha,k,eps,ReR,ImR,ReT,ImT,T2)
    Sweep {
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        k: f64,
        /// Coupling grid: start:stop:step, a comma list, or a single value
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Scattering error against the limit model (CSV: eps,errR,errT,fitted_order)
    Converge {
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        k: f64,
        /// Strictly decreasing widths: a comma list such as 0.125,0.0625,0.03125
        #[arg(long)]
        eps: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Resolvent error against the limit model (CSV: eps,h,error_L2,fitted_order)
    Resolve {
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        /// Shape file for the right-hand side f
        #[arg(long)]
        f: PathBuf,
        /// Real part of the spectral point zeta
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        zeta_re: f64,
        /// Imaginary part of the spectral point zeta (must be nonzero)
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        zeta_im: f64,
        /// Truncation half width of the comparison grid
        #[arg(long, default_value_t = 8.0)]
        half_width: f64,
        /// Strictly decreasing widths, comma separated
        #[arg(long)]
        eps: String,
        /// Grid cells per eps
        #[arg(long, default_value_t = 64)]
        steps_per_eps: usize,
        /// Also write the limit solution trace (CSV: x,ReY,ImY) to this file
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Sample step for the trace file
        #[arg(long, default_value_t = 0.01)]
        trace_step: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("dplab: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dplab: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

/// `DPLAB_THREADS` caps the rayon pool; 0 or unset means automatic.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DPLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("DPLAB_THREADS must be an integer, got {raw:?}")))?;
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    let settings = SolverSettings::default();
    match command {
        Command::Moments { phi, psi, tol, output } => {
            let phi = ShapePotential::from_path(&phi)?;
            let psi = load_psi(psi.as_ref())?;
            let report = moments(&phi, &psi, tol)?;
            let doc = serde_json::json!({
                "phi": phi.label,
                "psi": psi.label,
                "m0_phi": report.m0_phi,
                "m1_phi": report.m1_phi,
                "m0_psi": report.m0_psi,
                "tol": report.tol,
                "classification": format!("{:?}", report.classification),
            });
            write_out(output.as_ref(), &pretty(&doc))
        }
        Command::Resonances { phi, psi, window, step, root_tol, output } => {
            let phi = ShapePotential::from_path(&phi)?;
            let psi = load_psi(psi.as_ref())?;
            let window = parse_window(&window)?;
            let set = scan_resonances(&phi, &psi, window, step, root_tol, &settings)?;
            for a in &set.near_tangential {
                eprintln!("dplab: warning: near-tangential residual dip at alpha = {a}; possible uncertified double root");
            }
            let mut csv = String::from("alpha,theta,kappa,residual\n");
            for r in &set.records {
                csv += &format!("{},{},{},{}\n", r.alpha, r.theta, r.kappa, r.residual);
            }
            write_out(output.as_ref(), &csv)
        }
        Command::Scatter { phi, psi, alpha, beta, eps, k, right, output } => {
            let phi = ShapePotential::from_path(&phi)?;
            let psi = load_psi(psi.as_ref())?;
            let data = if right {
                scatter_finite_right(&phi, &psi, alpha, beta, eps, k, &settings)?
            } else {
                scatter_finite(&phi, &psi, alpha, beta, eps, k, &settings)?
            };
            let doc = serde_json::json!({
                "alpha": data.alpha,
                "beta": data.beta,
                "eps": data.eps,
                "k": data.k,
                "incidence": if right { "right" } else { "left" },
                "R": complex_json(data.r),
                "T": complex_json(data.t),
                "T2": data.transmission_probability(),
                "unitarity_defect": data.unitarity_defect(),
            });
            write_out(output.as_ref(), &pretty(&doc))
        }
        Command::Sweep { phi, psi, beta, eps, k, alpha, output } => {
            let phi = ShapePotential::from_path(&phi)?;
            let psi = load_psi(psi.as_ref())?;
            let alphas = parse_values(&alpha)?;
            let rows = sweep_alpha(&phi, &psi, beta, eps, k, &alphas, &settings)?;
            let mut csv = String::from("alpha,k,eps,ReR,ImR,ReT,ImT,T2\n");
            for d in &rows {
                csv += &format!(
                    "{},{},{},{},{},{},{},{}\n",
                    d.alpha, d.k, d.eps, d.r.re, d.r.im, d.t.re, d.t.im,
                    d.transmission_probability()
                );
            }
            write_out(output.as_ref(), &csv)
        }
        Command::Converge { phi, psi, alpha, beta, k, eps, output } => {
            let phi = ShapePotential::from_path(&phi)?;
            let psi = load_psi(psi.as_ref())?;
            let eps_list = parse_values(&eps)?;
            let opts = ConvergenceOptions::default();
            let report = scattering_convergence(&phi, &psi, alpha, beta, k, &eps_list, &opts)?;
            let order = report.order.map(|o| o.to_string()).unwrap_or_default();
            let mut csv = String::from("eps,errR,errT,fitted_order\n");
            for p in &report.points {
                csv += &format!("{},{},{},{}\n", p.eps, p.err_r, p.err_t, order);
            }
            write_out(output.as_ref(), &csv)
        }
        Command::Resolve {
            phi, psi, alpha, beta, f, zeta_re, zeta_im, half_width, eps,
            steps_per_eps, trace, trace_step, output,
        } => {
            let phi = ShapePotential::from_path(&phi)?;
            let psi = load_psi(psi.as_ref())?;
            let f = PiecewisePoly::from_path(&f)?;
            let eps_list = parse_values(&eps)?;
            let smallest = eps_list.last().copied().unwrap_or(1.0);
            let probe = ResolventProbe {
                f,
                zeta: Complex64::new(zeta_re, zeta_im),
                half_width,
                grid_step: smallest / steps_per_eps.max(1) as f64,
            };
            let opts = ResolventRateOptions { steps_per_eps, ..ResolventRateOptions::default() };
            let report = resolvent_error(&phi, &psi, alpha, beta, &eps_list, &probe, &opts)?;
            let order = report.order.map(|o| o.to_string()).unwrap_or_default();
            let mut csv = String::from("eps,h,error_L2,fitted_order\n");
            for p in &report.points {
                csv += &format!("{},{},{},{}\n", p.eps, p.h, p.err_l2, order);
            }
            write_out(output.as_ref(), &csv)?;
            if let Some(trace_path) = trace {
                let limit = solve_limit_resolvent(report.operator, &probe)?;
                let grid = limit.grid_trace(half_width, trace_step);
                let mut tcsv = String::from("x,ReY,ImY\n");
                for (x, y) in grid.xs.iter().zip(&grid.ys) {
                    tcsv += &format!("{},{},{}\n", x, y.re, y.im);
                }
                write_out(Some(&trace_path), &tcsv)?;
            }
            Ok(())
        }
    }
}

fn load_psi(path: Option<&PathBuf>) -> Result<ShapePotential> {
    match path {
        Some(p) => ShapePotential::from_path(p),
        None => Ok(ShapePotential::zero()),
    }
}

/// `min:max`
fn parse_window(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidInput(format!("window must be min:max, got {s:?}")));
    }
    Ok((parse_real(parts[0])?, parse_real(parts[1])?))
}

/// `start:stop:step` grid, comma list, or single value.
fn parse_values(s: &str) -> Result<Vec<f64>> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "grid must be start:stop:step, got {s:?}"
            )));
        }
        inclusive_grid(parse_real(parts[0])?, parse_real(parts[1])?, parse_real(parts[2])?)
    } else if s.contains(',') {
        s.split(',').map(parse_real).collect()
    } else {
        Ok(vec![parse_real(s)?])
    }
}

fn parse_real(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("expected a real number, got {s:?}")))
}

fn complex_json(c: Complex64) -> serde_json::Value {
    serde_json::json!({ "re": c.re, "im": c.im })
}

fn pretty(doc: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("JSON serialization cannot fail");
    text.push('\n');
    text
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
