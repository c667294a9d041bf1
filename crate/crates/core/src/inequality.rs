//! The two 3-variable Jensen ρ-functional inequalities.
//!
//! Family A:
//!
//! ```text
//! ‖f(x+y+αz) + f(x+y−αz) − 2f(x) − 2f(y)‖
//!     ≤ ‖ρ₁(f(x+y+αz) − f(x+y) − f(αz))‖ + ‖ρ₂(f(x+y−αz) + f(−x) + f(αz−y))‖
//! ```
//!
//! Family B:
//!
//! ```text
//! ‖f(x+βy+αz) − f(x−αz) − βf(y) − 2f(αz)‖
//!     ≤ ‖ρ₁(f(x+αz) − f(x) − f(αz))‖ + ‖ρ₂(f(x+βy−αz) − f(x) − βf(y) + f(αz))‖
//! ```
//!
//! The defect at a triple is the left norm minus the right-hand side; the
//! inequality holds with control φ exactly where `defect <= φ(x, y, z)`.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{ControlFunction, Envelope, PowerFit};
use crate::error::{Error, Result};
use crate::model::TestFunction;
use crate::space::{draw_triples, CVector, NormedSpace, SamplePlan};

pub const DEFAULT_SHELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::A => "A",
            Family::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoParams {
    pub family: Family,
    pub rho1: Complex64,
    pub rho2: Complex64,
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

impl RhoParams {
    pub fn family_a(rho1: Complex64, rho2: Complex64, alpha: f64) -> Self {
        RhoParams {
            family: Family::A,
            rho1,
            rho2,
            alpha,
            beta: 0.0,
        }
    }

    pub fn family_b(rho1: Complex64, rho2: Complex64, alpha: f64, beta: f64) -> Self {
        RhoParams {
            family: Family::B,
            rho1,
            rho2,
            alpha,
            beta,
        }
    }

    pub fn rho1_abs(&self) -> f64 {
        self.rho1.norm()
    }

    pub fn rho2_abs(&self) -> f64 {
        self.rho2.norm()
    }

    /// `1 + β`, the scale of the family-B schemes.
    pub fn beta_scale(&self) -> f64 {
        1.0 + self.beta
    }

    fn check_degenerate(&self) -> Result<()> {
        if !(self.alpha != 0.0 && self.alpha.is_finite()) {
            return Err(Error::DegenerateParameter(format!(
                "alpha must be finite and nonzero, got {}",
                self.alpha
            )));
        }
        if self.family == Family::B && !(self.beta != 0.0 && self.beta.is_finite()) {
            return Err(Error::DegenerateParameter(format!(
                "family B needs finite nonzero beta, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub diagnostic: String,
}

/// Checks the family's parameter condition exactly as stated: strict `<`
/// for `|ρ₁| + 3|ρ₂| < 2` and `|ρ₂| < 1`, non-strict `>=` for
/// `|β+2| >= |ρ₁| + |ρ₂(1−β)|`.
pub fn admissible(params: &RhoParams) -> Result<Admissibility> {
    params.check_degenerate()?;
    let r1 = params.rho1_abs();
    let r2 = params.rho2_abs();
    Ok(match params.family {
        Family::A => {
            let lhs = r1 + 3.0 * r2;
            if lhs < 2.0 {
                Admissibility {
                    admissible: true,
                    diagnostic: format!("|rho1| + 3|rho2| = {lhs} < 2 (|rho2| = {r2})"),
                }
            } else {
                Admissibility {
                    admissible: false,
                    diagnostic: format!("violated: |rho1| + 3|rho2| = {lhs} >= 2 (|rho2| = {r2})"),
                }
            }
        }
        Family::B => {
            let lhs = (params.beta + 2.0).abs();
            let rhs = r1 + (params.rho2 * (1.0 - params.beta)).norm();
            let mut violated = Vec::new();
            if !(r2 < 1.0) {
                violated.push(format!("|rho2| = {r2} >= 1"));
            }
            if !(lhs >= rhs) {
                violated.push(format!("|beta+2| = {lhs} < |rho1| + |rho2(1-beta)| = {rhs}"));
            }
            if violated.is_empty() {
                Admissibility {
                    admissible: true,
                    diagnostic: format!(
                        "|rho2| = {r2} < 1 and |beta+2| = {lhs} >= |rho1| + |rho2(1-beta)| = {rhs}"
                    ),
                }
            } else {
                Admissibility {
                    admissible: false,
                    diagnostic: format!("violated: {}", violated.join("; ")),
                }
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSample {
    pub triple: [CVector; 3],
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub defect: f64,
}

impl DefectSample {
    fn new(triple: [CVector; 3], lhs_norm: f64, rhs_norm: f64) -> Self {
        DefectSample {
            triple,
            lhs_norm,
            rhs_norm,
            defect: lhs_norm - rhs_norm,
        }
    }
}

fn expect_family(params: &RhoParams, want: Family) -> Result<()> {
    if params.family != want {
        return Err(Error::Family {
            expected: want.to_string(),
            got: params.family.to_string(),
        });
    }
    Ok(())
}

pub fn defect_a(
    f: &TestFunction,
    x: &CVector,
    y: &CVector,
    z: &CVector,
    params: &RhoParams,
) -> Result<DefectSample> {
    expect_family(params, Family::A)?;
    let az = z.scale(params.alpha);
    let s = x + y;
    let f_plus = f.evaluate(&(&s + &az))?;
    let f_minus = f.evaluate(&(&s - &az))?;
    let fx = f.evaluate(x)?;
    let fy = f.evaluate(y)?;

    let lhs = f_plus.axpy(1.0, &f_minus).axpy(-2.0, &fx).axpy(-2.0, &fy);
    let e1 = f_plus.axpy(-1.0, &f.evaluate(&s)?).axpy(-1.0, &f.evaluate(&az)?);
    let e2 = f_minus
        .axpy(1.0, &f.evaluate(&-x)?)
        .axpy(1.0, &f.evaluate(&(&az - y))?);

    let rhs = params.rho1_abs() * f.norm(&e1)? + params.rho2_abs() * f.norm(&e2)?;
    Ok(DefectSample::new(
        [x.clone(), y.clone(), z.clone()],
        f.norm(&lhs)?,
        rhs,
    ))
}

pub fn defect_b(
    f: &TestFunction,
    x: &CVector,
    y: &CVector,
    z: &CVector,
    params: &RhoParams,
) -> Result<DefectSample> {
    expect_family(params, Family::B)?;
    let beta = params.beta;
    let az = z.scale(params.alpha);
    let by = y.scale(beta);
    let x_by = x + &by;
    let fx = f.evaluate(x)?;
    let fy = f.evaluate(y)?;
    let faz = f.evaluate(&az)?;

    let lhs = f
        .evaluate(&(&x_by + &az))?
        .axpy(-1.0, &f.evaluate(&(x - &az))?)
        .axpy(-beta, &fy)
        .axpy(-2.0, &faz);
    let e1 = f.evaluate(&(x + &az))?.axpy(-1.0, &fx).axpy(-1.0, &faz);
    let e2 = f
        .evaluate(&(&x_by - &az))?
        .axpy(-1.0, &fx)
        .axpy(-beta, &fy)
        .axpy(1.0, &faz);

    let rhs = params.rho1_abs() * f.norm(&e1)? + params.rho2_abs() * f.norm(&e2)?;
    Ok(DefectSample::new(
        [x.clone(), y.clone(), z.clone()],
        f.norm(&lhs)?,
        rhs,
    ))
}

/// Dispatches on `params.family`.
pub fn defect(
    f: &TestFunction,
    x: &CVector,
    y: &CVector,
    z: &CVector,
    params: &RhoParams,
) -> Result<DefectSample> {
    match params.family {
        Family::A => defect_a(f, x, y, z, params),
        Family::B => defect_b(f, x, y, z, params),
    }
}

/// Defects over every triple, in input order.
pub fn defect_samples(
    f: &TestFunction,
    params: &RhoParams,
    triples: &[[CVector; 3]],
) -> Result<Vec<DefectSample>> {
    triples
        .par_iter()
        .map(|[x, y, z]| defect(f, x, y, z, params))
        .collect()
}

/// Writes samples as CSV with columns
/// `family, x_norm, y_norm, z_norm, lhs, rhs, defect`.
pub fn write_defects_csv<W: Write>(
    out: W,
    space: &NormedSpace,
    family: Family,
    samples: &[DefectSample],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "x_norm", "y_norm", "z_norm", "lhs", "rhs", "defect"])?;
    for s in samples {
        let mut row = vec![family.to_string()];
        for v in &s.triple {
            row.push(crate::harness::report::fmt_f64(space.norm_of(v)?));
        }
        for v in [s.lhs_norm, s.rhs_norm, s.defect] {
            row.push(crate::harness::report::fmt_f64(v));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Samples the defect of `f` and turns it into a data-driven control
/// function.
///
/// Triples are binned into `shells` log-spaced shells by the largest norm
/// among `x, y, z`. Each shell keeps its maximum clamped defect; the
/// envelope at a norm is the running maximum up to that shell. A power law
/// `θ(‖x‖ʳ + ‖y‖ʳ + ‖z‖ʳ)` is fitted to the clamped defects as well.
pub fn measure_envelope(
    f: &TestFunction,
    params: &RhoParams,
    plan: &SamplePlan,
    shells: usize,
) -> Result<ControlFunction> {
    let verdict = admissible(params)?;
    if !verdict.admissible {
        return Err(Error::Inadmissible(verdict.diagnostic));
    }
    if shells == 0 {
        return Err(Error::Config("shell count must be positive".into()));
    }
    let triples = draw_triples(f.space(), plan)?;
    if triples.is_empty() {
        return Err(Error::EmptySample);
    }
    let samples = defect_samples(f, params, &triples)?;
    let space = f.space();

    let lo = plan.inner_radius();
    let hi = plan.radius;
    let mut maxima = vec![0.0f64; shells];
    let mut observations = Vec::with_capacity(samples.len());
    for s in &samples {
        let norms = [
            space.norm_of(&s.triple[0])?,
            space.norm_of(&s.triple[1])?,
            space.norm_of(&s.triple[2])?,
        ];
        let top = norms.iter().copied().fold(0.0, f64::max);
        let k = Envelope::shell_index(lo, hi, shells, top);
        let d = s.defect.max(0.0);
        maxima[k] = maxima[k].max(d);
        observations.push((norms, d));
    }
    let fit = PowerFit::fit(&observations);
    Ok(ControlFunction::Measured(Envelope::from_shell_maxima(
        lo, hi, maxima, fit,
    )?))
}
