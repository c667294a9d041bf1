use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{corollary_constant, derived_constant, convergence_predicate, Constant, Corollary, SeriesSpec};
use crate::error::{Error, Result};
use crate::harness::config::{ControlSpec, ExperimentConfig};
use crate::harness::report::fmt_f64;
use crate::harness::verify::run_verify;
use crate::inequality::{admissible, Family, RhoParams};

pub const SWEEP_COLUMNS: [&str; 16] = [
    "family",
    "rho1_re",
    "rho1_im",
    "rho2_re",
    "rho2_im",
    "alpha",
    "beta",
    "theta",
    "r",
    "admissible",
    "converges",
    "max_violation",
    "paper_constant",
    "derived_constant",
    "empirical_sup",
    "status",
];

/// One grid cell. Quantities that could not be computed are `None`; the
/// reason is in `status`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub family: Family,
    pub rho1: Complex64,
    pub rho2: Complex64,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub r: f64,
    pub admissible: Option<bool>,
    pub converges: Option<bool>,
    pub max_violation: Option<f64>,
    pub paper_constant: Option<Constant>,
    pub derived_constant: Option<Constant>,
    pub empirical_sup: Option<f64>,
    pub status: String,
}

/// The leading keyword of an error message, e.g. `divergent`.
fn keyword(e: &Error) -> String {
    let text = e.root().to_string();
    text.split(':').next().unwrap_or("error").to_string()
}

fn axis<T: Copy>(axis: &Option<Vec<T>>, base: T) -> Vec<T> {
    axis.clone().unwrap_or_else(|| vec![base])
}

/// Parameters, `θ` and `r` of one grid cell.
pub type Cell = (RhoParams, f64, f64);

/// All grid cells in lexicographic order of `(ρ₁, ρ₂, α, β, r, θ)`.
pub fn grid_cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let (base_theta, base_r) = match cfg.control {
        ControlSpec::Power { theta, r } => (Some(theta), Some(r)),
        _ => (None, None),
    };
    let g = &cfg.sweep;
    let need = |axis: &Option<Vec<f64>>, base: Option<f64>, name: &str| -> Result<Vec<f64>> {
        match (axis, base) {
            (Some(v), _) => Ok(v.clone()),
            (None, Some(b)) => Ok(vec![b]),
            (None, None) => Err(Error::Config(format!(
                "sweep needs a {name} axis or a power control"
            ))),
        }
    };
    let thetas = need(&g.theta, base_theta, "theta")?;
    let rs = need(&g.r, base_r, "r")?;
    let p = cfg.params;
    let mut cells = Vec::new();
    for &rho1 in &axis(&g.rho1, p.rho1) {
        for &rho2 in &axis(&g.rho2, p.rho2) {
            for &alpha in &axis(&g.alpha, p.alpha) {
                for &beta in &axis(&g.beta, p.beta) {
                    for &r in &rs {
                        for &theta in &thetas {
                            let params = RhoParams {
                                rho1,
                                rho2,
                                alpha,
                                beta,
                                ..p
                            };
                            cells.push((params, theta, r));
                        }
                    }
                }
            }
        }
    }
    Ok(cells)
}

fn run_cell(cfg: &ExperimentConfig, params: RhoParams, theta: f64, r: f64) -> SweepRow {
    let mut row = SweepRow {
        family: params.family,
        rho1: params.rho1,
        rho2: params.rho2,
        alpha: params.alpha,
        beta: params.beta,
        theta,
        r,
        admissible: None,
        converges: None,
        max_violation: None,
        paper_constant: None,
        derived_constant: None,
        empirical_sup: None,
        status: String::new(),
    };
    match admissible(&params) {
        Ok(a) => row.admissible = Some(a.admissible),
        Err(e) => {
            row.status = keyword(&e);
            return row;
        }
    }
    let scheme = match cfg.resolve_scheme(&params) {
        Ok((s, _)) => s,
        Err(e) => {
            row.status = keyword(&e);
            return row;
        }
    };
    match convergence_predicate(&scheme, r) {
        Ok(p) => row.converges = Some(p.converges),
        Err(e) => {
            row.status = keyword(&e);
            return row;
        }
    }
    row.paper_constant = match corollary_constant(Corollary::for_scheme(&scheme), theta, r, params.rho2_abs(), params.beta) {
        Ok(v) => Some(Constant::Finite(v)),
        Err(Error::OutOfRegime(_)) => Some(Constant::Divergent),
        Err(_) => None,
    };
    let mut spec = SeriesSpec::new(scheme, &params);
    spec.printed_display = cfg.printed_display;
    row.derived_constant = derived_constant(&spec, theta, r).ok();

    if row.admissible != Some(true) {
        row.status = "inadmissible".into();
        return row;
    }
    if row.converges != Some(true) {
        row.status = "divergent".into();
        return row;
    }
    let mut cell = cfg.clone();
    cell.params = params;
    cell.control = ControlSpec::Power { theta, r };
    cell.audit = true;
    cell.sweep = Default::default();
    match run_verify(&cell) {
        Ok(rep) => {
            row.max_violation = Some(rep.summary.max_violation);
            row.empirical_sup = rep.audit.map(|a| a.empirical_sup);
            row.status = if rep.summary.pass { "pass" } else { "violation" }.into();
        }
        Err(e) => row.status = keyword(&e),
    }
    row
}

/// Runs every grid cell; failures are recorded in the row, never raised.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let cells = grid_cells(cfg)?;
    Ok(cells
        .into_par_iter()
        .map(|(params, theta, r)| run_cell(cfg, params, theta, r))
        .collect())
}

fn opt_f64(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => fmt_f64(x),
        _ => String::new(),
    }
}

fn opt_constant(c: Option<Constant>) -> String {
    match c {
        Some(Constant::Finite(v)) => opt_f64(Some(v)),
        Some(Constant::Divergent) => "divergent".into(),
        None => String::new(),
    }
}

fn opt_bool(b: Option<bool>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.family.to_string(),
            fmt_f64(r.rho1.re),
            fmt_f64(r.rho1.im),
            fmt_f64(r.rho2.re),
            fmt_f64(r.rho2.im),
            fmt_f64(r.alpha),
            fmt_f64(r.beta),
            fmt_f64(r.theta),
            fmt_f64(r.r),
            opt_bool(r.admissible),
            opt_bool(r.converges),
            opt_f64(r.max_violation),
            opt_constant(r.paper_constant),
            opt_constant(r.derived_constant),
            opt_f64(r.empirical_sup),
            r.status.clone(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}
