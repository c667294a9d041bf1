//! Direct-method construction of the additive approximant.
//!
//! Four schemes appear in the stability theorems: forward and backward
//! iteration with the dyadic scale 2 (family A) and with the scale `1+β`
//! (family B). Forward terms are `f(λⁿx)/λⁿ`, backward terms `λⁿf(x/λⁿ)`.
//! Both are the same kernel `f(sⁿx)/sⁿ` with argument step `s = λ` or
//! `s = 1/λ`, so a backward scheme with `|λ| < 1` is a forward scheme in
//! disguise and vice versa. [`Scheme`] keeps the theorem's own `(direction,
//! λ)` pair because the error series in [`crate::bounds`] depend on it.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Tail;
use crate::error::{Error, Result};
use crate::inequality::{Family, RhoParams};
use crate::model::TestFunction;
use crate::space::CVector;

pub const MAX_ORBIT_INDEX: u32 = 512;
pub const DEFAULT_MAX_N: u32 = 200;
/// `ln(f64::MAX)`, rounded down.
const LN_MAX: f64 = 709.78;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub direction: Direction,
    pub scale: f64,
    /// Which family's error series this scheme instantiates.
    pub family: Family,
}

impl Scheme {
    pub fn new(direction: Direction, scale: f64, family: Family) -> Result<Self> {
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::Scheme(format!("scale must be finite and nonzero, got {scale}")));
        }
        if scale.abs() == 1.0 {
            return Err(Error::DegenerateScale);
        }
        Ok(Scheme {
            direction,
            scale,
            family,
        })
    }

    /// `λ = 2`, family A.
    pub fn dyadic(direction: Direction) -> Self {
        Scheme {
            direction,
            scale: 2.0,
            family: Family::A,
        }
    }

    /// `λ = 1 + β`, family B.
    pub fn beta(direction: Direction, beta: f64) -> Result<Self> {
        Scheme::new(direction, 1.0 + beta, Family::B)
    }

    /// The scheme a parameter set pairs with.
    pub fn for_params(direction: Direction, params: &RhoParams) -> Result<Self> {
        match params.family {
            Family::A => Ok(Scheme::dyadic(direction)),
            Family::B => Scheme::beta(direction, params.beta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        Scheme::new(self.direction, self.scale, self.family).map(|_| ())
    }

    /// True when orbit arguments grow, i.e. `|s| > 1` for the kernel step `s`.
    pub fn expanding(&self) -> bool {
        (self.scale.abs() > 1.0) == (self.direction == Direction::Forward)
    }

    /// `s` in the kernel `f(sⁿx)/sⁿ`.
    pub fn argument_step(&self) -> f64 {
        match self.direction {
            Direction::Forward => self.scale,
            Direction::Backward => 1.0 / self.scale,
        }
    }

    pub fn label(&self) -> String {
        let dir = match self.direction {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        };
        match self.family {
            Family::A => format!("{dir} dyadic (lambda={})", self.scale),
            Family::B => format!("{dir} (1+beta) (lambda={})", self.scale),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub point: CVector,
    pub value: CVector,
    pub iterations: u32,
    pub residuals: Vec<f64>,
    /// A-posteriori estimate of `‖value − A(x)‖` from the last residual ratio.
    pub tail_bound: Tail,
    pub converged: bool,
}

/// `|λ|ⁿ` for the kernel, after the overflow guard.
fn kernel_factor(scheme: &Scheme, n: u32) -> Result<(f64, bool)> {
    if n > MAX_ORBIT_INDEX {
        return Err(Error::ScaleOverflow { n });
    }
    let expanding = scheme.expanding();
    // whichever of λ and 1/λ exceeds one in magnitude is raised to n
    let base = if scheme.scale.abs() > 1.0 {
        scheme.scale
    } else {
        1.0 / scheme.scale
    };
    if n as f64 * base.abs().ln() > LN_MAX {
        return Err(Error::ScaleOverflow { n });
    }
    Ok((base.powi(n as i32), expanding))
}

/// The `n`-th sequence term; `n = 0` gives `f(x)`.
pub fn orbit_term(f: &TestFunction, x: &CVector, scheme: &Scheme, n: u32) -> Result<CVector> {
    scheme.validate()?;
    let (factor, expanding) = kernel_factor(scheme, n)?;
    let term = if expanding {
        div(&f.evaluate(&x.scale(factor))?, factor)
    } else {
        f.evaluate(&div(x, factor))?.scale(factor)
    };
    if !term.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite orbit term at n={n} for {}",
            scheme.label()
        )));
    }
    Ok(term)
}

fn div(v: &CVector, s: f64) -> CVector {
    CVector::new(v.coords().iter().map(|c| c / s).collect())
}

/// Iterates until two consecutive residuals are `<= tol`, or `max_n` steps.
pub fn approximate(
    f: &TestFunction,
    x: &CVector,
    scheme: &Scheme,
    tol: f64,
    max_n: u32,
) -> Result<ConvergenceReport> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {tol}")));
    }
    f.space().check(x)?;
    let mut prev = orbit_term(f, x, scheme, 0)?;
    let mut residuals = Vec::new();
    let mut hits = 0;
    let mut converged = false;
    for n in 1..=max_n {
        let term = orbit_term(f, x, scheme, n)?;
        let res = f.norm(&(&term - &prev))?;
        residuals.push(res);
        prev = term;
        hits = if res <= tol { hits + 1 } else { 0 };
        if hits >= 2 {
            converged = true;
            break;
        }
    }
    let tail_bound = if converged {
        geometric_tail(&residuals)
    } else {
        Tail::Unavailable
    };
    Ok(ConvergenceReport {
        point: x.clone(),
        value: prev,
        iterations: residuals.len() as u32,
        residuals,
        tail_bound,
        converged,
    })
}

fn geometric_tail(residuals: &[f64]) -> Tail {
    let [.., a, b] = residuals else {
        return Tail::Unavailable;
    };
    if *b == 0.0 {
        return Tail::Finite(0.0);
    }
    let q = b / a;
    if *a > 0.0 && q < 1.0 {
        Tail::Finite(b * q / (1.0 - q))
    } else {
        Tail::Unavailable
    }
}

fn converged_value(
    f: &TestFunction,
    x: &CVector,
    scheme: &Scheme,
    tol: f64,
    max_n: u32,
) -> Result<CVector> {
    let report = approximate(f, x, scheme, tol, max_n)?;
    if !report.converged {
        return Err(Error::NotConverged {
            scheme: scheme.label(),
            point: x.to_string(),
        });
    }
    Ok(report.value)
}

/// Largest `‖A(x+y) − A(x) − A(y)‖` over the pairs.
pub fn additive_limit_check(
    f: &TestFunction,
    scheme: &Scheme,
    tol: f64,
    max_n: u32,
    pairs: &[(CVector, CVector)],
) -> Result<f64> {
    let defects = pairs
        .par_iter()
        .map(|(x, y)| {
            let ax = converged_value(f, x, scheme, tol, max_n)?;
            let ay = converged_value(f, y, scheme, tol, max_n)?;
            let axy = converged_value(f, &(x + y), scheme, tol, max_n)?;
            f.norm(&(&(&axy - &ax) - &ay))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}

/// Largest `‖A₁(x) − A₂(x)‖` over the points.
pub fn uniqueness_crosscheck(
    f: &TestFunction,
    first: &Scheme,
    second: &Scheme,
    points: &[CVector],
    tol: f64,
    max_n: u32,
) -> Result<f64> {
    let gaps = points
        .par_iter()
        .map(|x| {
            let a1 = converged_value(f, x, first, tol, max_n)?;
            let a2 = converged_value(f, x, second, tol, max_n)?;
            f.norm(&(&a1 - &a2))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
