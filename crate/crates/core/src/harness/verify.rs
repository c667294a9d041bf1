use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{audit, convergence_predicate, phi_tilde, BoundAudit, ControlFunction, SeriesSpec, Tail};
use crate::direct_method::{approximate, Scheme};
use crate::error::{Error, Result};
use crate::harness::config::{ControlSpec, ExperimentConfig};
use crate::inequality::{admissible, measure_envelope, Admissibility, RhoParams};
use crate::space::{draw_points, CVector, SamplePlan};

/// Seed offset for the envelope sample when the config gives none.
const ENVELOPE_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub index: usize,
    pub x: CVector,
    /// `‖f(x) − A(x)‖`.
    pub deviation: f64,
    pub phi_tilde: f64,
    pub tail: Tail,
    /// `phi_tilde + tail − deviation`.
    pub margin: f64,
    pub iterations: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub points: usize,
    /// `max(deviation − phi_tilde − tail)` over the points.
    pub max_violation: f64,
    pub pass: bool,
    /// Wall-clock time; left out of the serialized report so reruns match.
    #[serde(skip)]
    pub runtime: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub scheme: Scheme,
    /// Set when the scheme belongs to the other family (`force`).
    pub cross_paired: bool,
    pub admissibility: Admissibility,
    pub control: ControlFunction,
    pub points: Vec<PointRecord>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<BoundAudit>,
}

/// Fails with [`Error::Inadmissible`] unless the parameters satisfy their
/// family's condition.
pub fn require_admissible(params: &RhoParams) -> Result<Admissibility> {
    let verdict = admissible(params)?;
    if !verdict.admissible {
        return Err(Error::Inadmissible(verdict.diagnostic));
    }
    Ok(verdict)
}

/// The point plan widened so that every orbit the error series visits
/// stays inside the measured table.
fn envelope_plan(cfg: &ExperimentConfig, octaves: u32, samples: usize, seed: Option<u64>) -> Result<SamplePlan> {
    let a = cfg.params.alpha.abs();
    let widen = 2f64.powi(octaves as i32) * a.max(1.0 / a);
    SamplePlan::new(
        seed.unwrap_or(cfg.plan.seed ^ ENVELOPE_SEED_MIX),
        samples,
        cfg.plan.radius * widen,
        cfg.plan.inner_radius() / widen,
    )
}

/// The control the bound is built from, measuring it if asked to.
pub fn resolve_control(cfg: &ExperimentConfig) -> Result<ControlFunction> {
    match &cfg.control {
        ControlSpec::Measured(m) => {
            let plan = envelope_plan(cfg, m.octaves, m.samples, m.seed)?;
            measure_envelope(&cfg.function, &cfg.params, &plan, m.shells)
        }
        other => Ok(other.fixed().expect("non-measured control")),
    }
}

/// Refuses controls whose error series cannot converge for `scheme`.
/// A measured table is judged by the exponent of its power-law fit, and
/// skipped when the fitted amplitude is negligible.
fn check_convergence(control: &ControlFunction, scheme: &Scheme, atol: f64) -> Result<()> {
    let r = match control {
        ControlFunction::Power { r, theta } if *theta > 0.0 => *r,
        ControlFunction::Measured(e) if e.has_fit() && e.fit().theta > atol => e.fit().r,
        _ => return Ok(()),
    };
    let p = convergence_predicate(scheme, r)?;
    if !p.converges {
        return Err(Error::Divergent {
            ratio: p.ratio,
            condition: p.condition,
        });
    }
    Ok(())
}

/// Checks `‖f(x) − A(x)‖ <= φ̃(x) + tail` at every sampled point.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    cfg.validate().map_err(|e| e.at("config"))?;
    let admissibility = require_admissible(&cfg.params).map_err(|e| e.at("admissibility"))?;
    let (scheme, cross_paired) = cfg.resolve_scheme(&cfg.params).map_err(|e| e.at("scheme"))?;
    let control = resolve_control(cfg).map_err(|e| e.at("control"))?;
    check_convergence(&control, &scheme, cfg.tolerances.atol).map_err(|e| e.at("convergence"))?;

    let f = &cfg.function;
    let space = f.space();
    let points = draw_points(space, &cfg.plan).map_err(|e| e.at("sampling"))?;
    if points.is_empty() {
        return Err(Error::EmptySample.at("sampling"));
    }
    let mut spec = SeriesSpec::new(scheme, &cfg.params);
    spec.trunc_terms = cfg.trunc_terms;
    spec.printed_display = cfg.printed_display;

    let tol = cfg.tolerances.tol;
    let records = points
        .par_iter()
        .enumerate()
        .map(|(index, x)| {
            let rep = approximate(f, x, &scheme, tol, cfg.max_n).map_err(|e| e.at("approximate"))?;
            if !rep.converged {
                return Err(Error::NotConverged {
                    scheme: scheme.label(),
                    point: x.to_string(),
                }
                .at("approximate"));
            }
            let deviation = f.norm(&(&f.evaluate(x)? - &rep.value))?;
            let series = phi_tilde(&control, space, x, &spec).map_err(|e| e.at("series"))?;
            Ok(PointRecord {
                index,
                x: x.clone(),
                deviation,
                phi_tilde: series.value,
                tail: series.tail,
                margin: series.total() - deviation,
                iterations: rep.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let max_violation = records
        .iter()
        .map(|p| -p.margin)
        .fold(f64::NEG_INFINITY, f64::max);

    let audit_block = match (&control, cfg.audit) {
        (ControlFunction::Power { .. }, true) => Some(
            audit(f, &cfg.params, &scheme, &control, &points, tol, cfg.max_n)
                .map_err(|e| e.at("audit"))?,
        ),
        (_, true) => return Err(Error::Config("audit needs a power control".into()).at("audit")),
        _ => None,
    };

    Ok(RunReport {
        config: cfg.clone(),
        scheme,
        cross_paired,
        admissibility,
        control,
        summary: Summary {
            points: records.len(),
            max_violation,
            pass: max_violation <= tol,
            runtime: start.elapsed(),
        },
        points: records,
        audit: audit_block,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::report::{render, Format};

    fn config(function: &str, control: &str, direction: &str) -> ExperimentConfig {
        let text = format!(
            r#"{{
            "function": {function},
            "params": {{"family": "A", "rho1": [0.0, 0.0], "rho2": [0.0, 0.0], "alpha": 1.0}},
            "scheme": {{"direction": "{direction}"}},
            "control": {control},
            "plan": {{"seed": 9, "count": 20, "radius": 4.0}}
        }}"#
        );
        ExperimentConfig::from_json(&text).unwrap()
    }

    const SHIFT: &str = r#"{"space": {"dim": 1, "norm": "l2"}, "core": {"kind": "identity"},
        "perturbation": {"kind": "tabulated", "step": 1.0, "entries": [], "default": [[0.5, 0.0]]}}"#;
    const EXACT: &str = r#"{"space": {"dim": 2, "norm": "l2"}, "core": {"kind": "identity"}}"#;
    const MEASURED: &str = r#"{"kind": "measured", "shells": 32, "samples": 1500}"#;

    #[test]
    fn exact_function_passes_with_zero_deviation() {
        let rep = run_verify(&config(EXACT, MEASURED, "forward")).unwrap();
        assert!(rep.summary.pass);
        assert!(rep.summary.max_violation <= 1e-12);
        for p in &rep.points {
            assert!(p.deviation <= 1e-12);
            assert!(p.margin >= -1e-12);
        }
    }

    #[test]
    fn shifted_identity_passes() {
        let rep = run_verify(&config(SHIFT, MEASURED, "forward")).unwrap();
        assert!(rep.summary.pass, "{}", rep.summary.max_violation);
        for p in &rep.points {
            assert!((p.deviation - 0.5).abs() < 1e-9);
            assert_eq!(p.tail, Tail::Unavailable);
        }
    }

    #[test]
    fn power_control_r2_forward_diverges() {
        let e = run_verify(&config(EXACT, r#"{"kind": "power", "theta": 1.0, "r": 2.0}"#, "forward")).unwrap_err();
        assert!(e.to_string().starts_with("convergence: divergent"), "{e}");
        assert!(e.is_regime_failure());
    }

    #[test]
    fn measured_r2_perturbation_forward_diverges() {
        let f = r#"{"space": {"dim": 2, "norm": "l2"}, "core": {"kind": "identity"},
            "perturbation": {"kind": "power", "theta": 0.1, "r": 2.0}}"#;
        let e = run_verify(&config(f, MEASURED, "forward")).unwrap_err();
        assert!(matches!(e.root(), Error::Divergent { .. }), "{e}");
    }

    #[test]
    fn inadmissible_is_named() {
        let mut cfg = config(EXACT, MEASURED, "forward");
        cfg.params.rho2 = num_complex::Complex64::new(0.7, 0.0);
        let e = run_verify(&cfg).unwrap_err();
        assert!(e.to_string().starts_with("admissibility: inadmissible"), "{e}");
    }

    #[test]
    fn one_point_gives_one_record() {
        let cfg = config(EXACT, r#"{"kind": "zero"}"#, "forward").with_points(1);
        let rep = run_verify(&cfg).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&render(&rep, Format::Json).unwrap()).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 1);
        let csv = render(&rep, Format::Csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let cfg = config(SHIFT, MEASURED, "forward");
        let a = render(&run_verify(&cfg).unwrap(), Format::Json).unwrap();
        let b = render(&run_verify(&cfg).unwrap(), Format::Json).unwrap();
        assert_eq!(a, b);
    }
}
