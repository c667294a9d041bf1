//! Experiment configuration: one JSON document per run.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::{ControlFunction, Envelope, DEFAULT_TRUNC_TERMS};
use crate::direct_method::{Direction, Scheme, DEFAULT_MAX_N};
use crate::error::{Error, Result};
use crate::inequality::{Family, RhoParams};
use crate::model::TestFunction;
use crate::space::SamplePlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: TestFunction,
    pub params: RhoParams,
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub control: ControlSpec,
    pub plan: SamplePlan,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_max_n")]
    pub max_n: u32,
    #[serde(default = "default_trunc_terms")]
    pub trunc_terms: usize,
    #[serde(default)]
    pub printed_display: bool,
    /// Allow a family to run with the other family's scheme.
    #[serde(default)]
    pub force: bool,
    /// Attach a constant audit to verify reports (power controls only).
    #[serde(default)]
    pub audit: bool,
    #[serde(default)]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_max_n() -> u32 {
    DEFAULT_MAX_N
}

fn default_trunc_terms() -> usize {
    DEFAULT_TRUNC_TERMS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub direction: Direction,
    /// Defaults to 2 for family A and `1+β` for family B.
    #[serde(default)]
    pub scale: Option<f64>,
    /// Which family's series to use; defaults to the parameter family.
    #[serde(default)]
    pub family: Option<Family>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Convergence tolerance of the iteration and slack of the bound check.
    pub tol: f64,
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol: 1e-9,
            atol: 1e-12,
            rtol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlSpec {
    Zero,
    Power { theta: f64, r: f64 },
    Tabulated(Envelope),
    Measured(MeasuredSpec),
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec::Measured(MeasuredSpec::default())
    }
}

impl ControlSpec {
    /// The control as a function, for every kind that needs no sampling.
    pub fn fixed(&self) -> Option<ControlFunction> {
        match self {
            ControlSpec::Zero => Some(ControlFunction::Zero),
            ControlSpec::Power { theta, r } => Some(ControlFunction::Power {
                theta: *theta,
                r: *r,
            }),
            ControlSpec::Tabulated(e) => Some(ControlFunction::Tabulated(e.clone())),
            ControlSpec::Measured(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasuredSpec {
    pub shells: usize,
    pub samples: usize,
    /// Dyadic octaves the envelope extends beyond the point plan on each side.
    pub octaves: u32,
    /// Sampling seed; defaults to a value derived from the plan seed.
    pub seed: Option<u64>,
}

impl Default for MeasuredSpec {
    fn default() -> Self {
        MeasuredSpec {
            shells: 64,
            samples: 4000,
            octaves: 40,
            seed: None,
        }
    }
}

/// Axes of a parameter sweep. A missing axis holds the base value; an
/// empty axis makes the grid empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub rho1: Option<Vec<Complex64>>,
    pub rho2: Option<Vec<Complex64>>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub r: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub report: Option<String>,
    pub sweep: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        let t = self.tolerances;
        if !(t.tol > 0.0 && t.atol >= 0.0 && t.rtol >= 0.0) {
            return Err(Error::Config(format!(
                "tolerances need tol > 0, atol >= 0, rtol >= 0, got {t:?}"
            )));
        }
        if self.trunc_terms == 0 {
            return Err(Error::Config("trunc_terms must be >= 1".into()));
        }
        if let ControlSpec::Measured(m) = self.control {
            if m.shells == 0 || m.samples == 0 {
                return Err(Error::Config("measured control needs shells and samples > 0".into()));
            }
        }
        Ok(())
    }

    /// The scheme for this parameter set, and whether it crosses families.
    ///
    /// Family A pairs with the dyadic scale 2 and family B with `1+β`; any
    /// other combination is refused unless `force` is set.
    pub fn resolve_scheme(&self, params: &RhoParams) -> Result<(Scheme, bool)> {
        let family = self.scheme.family.unwrap_or(params.family);
        let natural = match family {
            Family::A => 2.0,
            Family::B => params.beta_scale(),
        };
        let scale = self.scheme.scale.unwrap_or(natural);
        let scheme = Scheme::new(self.scheme.direction, scale, family)?;
        let paired = Scheme::for_params(self.scheme.direction, params)?;
        let crossed = scheme != paired;
        if crossed && !self.force {
            return Err(Error::Scheme(format!(
                "family {} pairs with {}, not {}; set force to cross-pair",
                params.family,
                paired.label(),
                scheme.label()
            )));
        }
        Ok((scheme, crossed))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.plan.seed = seed;
        self
    }

    pub fn with_points(mut self, count: usize) -> Self {
        self.plan.count = count;
        self
    }
}
