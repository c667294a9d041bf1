//! Experiment orchestration: configuration, verification runs, sweeps and
//! report emission.

pub mod config;
pub mod report;
pub mod sweep;
pub mod verify;

use rayon::prelude::*;

use crate::bounds::{audit, BoundAudit, ControlFunction};
use crate::direct_method::{approximate, ConvergenceReport};
use crate::error::{Error, Result};
use crate::inequality::{admissible, defect_samples, Admissibility, DefectSample};
use crate::space::{draw_points, draw_triples};

pub use config::{ControlSpec, ExperimentConfig, MeasuredSpec, SchemeSpec, SweepGrid, Tolerances};
pub use report::{approximations_csv, audit_csv, fmt_f64, render, to_stable_json, write_report, Format};
pub use sweep::{run_sweep, sweep_csv, SweepRow, SWEEP_COLUMNS};
pub use verify::{run_verify, PointRecord, RunReport, Summary};

pub fn check_params(cfg: &ExperimentConfig) -> Result<Admissibility> {
    admissible(&cfg.params)
}

/// Defects of the configured function at the plan's triples.
pub fn run_defects(cfg: &ExperimentConfig) -> Result<Vec<DefectSample>> {
    let triples = draw_triples(cfg.function.space(), &cfg.plan).map_err(|e| e.at("sampling"))?;
    defect_samples(&cfg.function, &cfg.params, &triples).map_err(|e| e.at("defect"))
}

/// The approximant at each plan point.
pub fn run_approximate(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceReport>> {
    let (scheme, _) = cfg.resolve_scheme(&cfg.params).map_err(|e| e.at("scheme"))?;
    let points = draw_points(cfg.function.space(), &cfg.plan).map_err(|e| e.at("sampling"))?;
    points
        .par_iter()
        .map(|x| approximate(&cfg.function, x, &scheme, cfg.tolerances.tol, cfg.max_n))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at("approximate"))
}

/// Constant audit at the plan points; needs a power control.
pub fn run_audit(cfg: &ExperimentConfig) -> Result<BoundAudit> {
    cfg.validate().map_err(|e| e.at("config"))?;
    let (scheme, _) = cfg.resolve_scheme(&cfg.params).map_err(|e| e.at("scheme"))?;
    let phi: ControlFunction = match cfg.control.fixed() {
        Some(phi @ ControlFunction::Power { .. }) => phi,
        _ => return Err(Error::Config("audit needs a power control".into()).at("config")),
    };
    let points = draw_points(cfg.function.space(), &cfg.plan).map_err(|e| e.at("sampling"))?;
    audit(&cfg.function, &cfg.params, &scheme, &phi, &points, cfg.tolerances.tol, cfg.max_n)
        .map_err(|e| e.at("audit"))
}
