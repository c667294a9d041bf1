//! Test functions `f = core + perturbation`.
//!
//! The additive core is an exact linear map, so every deviation of `f` from
//! additivity comes from the perturbation. Perturbations are deterministic:
//! their direction at a point is derived from a hash of the quantized point
//! and a seed, which keeps `f` a genuine (non-constant) function without
//! storing any table.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{random_direction, CVector, NormedSpace};

/// Grid step used to quantize points for hashing and table lookups.
pub const DEFAULT_QUANTUM: f64 = 1.0 / 1_048_576.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdditiveCore {
    Identity,
    /// `d x d` complex matrix acting on coordinates.
    ComplexLinear { matrix: Vec<Vec<Complex64>> },
    /// `2d x 2d` real matrix acting on `[re_0, im_0, re_1, im_1, ...]`.
    RealLinear { matrix: Vec<Vec<f64>> },
}

impl AdditiveCore {
    /// A complex-linear core with i.i.d. standard normal entries.
    pub fn random_complex(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix = (0..dim)
            .map(|_| random_direction(&mut rng, dim).into_coords())
            .collect();
        AdditiveCore::ComplexLinear { matrix }
    }

    /// A real-linear core `x -> a x + b conj(x)` applied coordinatewise.
    /// It is additive but not complex-linear unless `b = 0`.
    pub fn conjugate_mix(dim: usize, a: Complex64, b: Complex64) -> Self {
        let n = 2 * dim;
        let mut matrix = vec![vec![0.0; n]; n];
        for k in 0..dim {
            // [re; im] of a z + b conj(z)
            matrix[2 * k][2 * k] = a.re + b.re;
            matrix[2 * k][2 * k + 1] = -a.im + b.im;
            matrix[2 * k + 1][2 * k] = a.im + b.im;
            matrix[2 * k + 1][2 * k + 1] = a.re - b.re;
        }
        AdditiveCore::RealLinear { matrix }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let (rows, cols, want) = match self {
            AdditiveCore::Identity => return Ok(()),
            AdditiveCore::ComplexLinear { matrix } => (
                matrix.len(),
                matrix.iter().map(Vec::len).collect::<Vec<_>>(),
                dim,
            ),
            AdditiveCore::RealLinear { matrix } => (
                matrix.len(),
                matrix.iter().map(Vec::len).collect::<Vec<_>>(),
                2 * dim,
            ),
        };
        if rows != want {
            return Err(Error::Dimension {
                expected: want,
                got: rows,
            });
        }
        if let Some(&bad) = cols.iter().find(|&&c| c != want) {
            return Err(Error::Dimension {
                expected: want,
                got: bad,
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        match self {
            AdditiveCore::Identity => x.clone(),
            AdditiveCore::ComplexLinear { matrix } => CVector::new(
                matrix
                    .iter()
                    .map(|row| row.iter().zip(x.coords()).map(|(a, b)| a * b).sum())
                    .collect(),
            ),
            AdditiveCore::RealLinear { matrix } => {
                let xr = x.to_real();
                let yr: Vec<f64> = matrix
                    .iter()
                    .map(|row| row.iter().zip(&xr).map(|(a, b)| a * b).sum())
                    .collect();
                CVector::from_real(&yr)
            }
        }
    }
}

/// A lookup table of perturbation values keyed by quantized points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSpec", into = "TableSpec")]
pub struct Table {
    step: f64,
    entries: Vec<(CVector, CVector)>,
    default: Option<CVector>,
    index: HashMap<Vec<i64>, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableSpec {
    #[serde(default = "default_quantum")]
    step: f64,
    #[serde(default)]
    entries: Vec<TableEntry>,
    #[serde(default)]
    default: Option<CVector>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableEntry {
    point: CVector,
    value: CVector,
}

fn default_quantum() -> f64 {
    DEFAULT_QUANTUM
}

impl TryFrom<TableSpec> for Table {
    type Error = Error;
    fn try_from(spec: TableSpec) -> Result<Table> {
        Table::new(
            spec.step,
            spec.entries.into_iter().map(|e| (e.point, e.value)).collect(),
            spec.default,
        )
    }
}

impl From<Table> for TableSpec {
    fn from(t: Table) -> TableSpec {
        TableSpec {
            step: t.step,
            entries: t
                .entries
                .into_iter()
                .map(|(point, value)| TableEntry { point, value })
                .collect(),
            default: t.default,
        }
    }
}

impl Table {
    pub fn new(
        step: f64,
        entries: Vec<(CVector, CVector)>,
        default: Option<CVector>,
    ) -> Result<Table> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!("table step must be positive, got {step}")));
        }
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (quantize(p, step), i))
            .collect();
        Ok(Table {
            step,
            entries,
            default,
            index,
        })
    }

    pub fn lookup(&self, x: &CVector) -> Option<&CVector> {
        self.index
            .get(&quantize(x, self.step))
            .map(|&i| &self.entries[i].1)
            .or(self.default.as_ref())
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let vectors = self
            .entries
            .iter()
            .flat_map(|(p, v)| [p, v])
            .chain(self.default.as_ref());
        for v in vectors {
            if v.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: v.dim(),
                });
            }
        }
        Ok(())
    }
}

fn quantize(x: &CVector, step: f64) -> Vec<i64> {
    x.to_real()
        .into_iter()
        .map(|v| (v / step).round() as i64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    None,
    /// `‖p(x)‖ <= epsilon`, magnitude and direction hashed from `x`.
    Bounded { epsilon: f64 },
    /// `‖p(x)‖ = theta ‖x‖^r`.
    Power { theta: f64, r: f64 },
    Tabulated(Table),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    #[serde(flatten)]
    pub kind: PerturbationKind,
    #[serde(default)]
    pub direction_seed: u64,
    /// Use this direction everywhere instead of the hashed one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_direction: Option<CVector>,
}

impl Perturbation {
    pub fn none() -> Self {
        Perturbation {
            kind: PerturbationKind::None,
            direction_seed: 0,
            fixed_direction: None,
        }
    }

    pub fn bounded(epsilon: f64, direction_seed: u64) -> Self {
        Perturbation {
            kind: PerturbationKind::Bounded { epsilon },
            direction_seed,
            fixed_direction: None,
        }
    }

    pub fn power(theta: f64, r: f64, direction_seed: u64) -> Self {
        Perturbation {
            kind: PerturbationKind::Power { theta, r },
            direction_seed,
            fixed_direction: None,
        }
    }

    /// The constant offset `p(x) = value` as an empty table with a default.
    pub fn constant(value: CVector) -> Self {
        let step = DEFAULT_QUANTUM;
        Perturbation {
            kind: PerturbationKind::Tabulated(
                Table::new(step, Vec::new(), Some(value)).expect("positive step"),
            ),
            direction_seed: 0,
            fixed_direction: None,
        }
    }

    pub fn with_fixed_direction(mut self, direction: CVector) -> Self {
        self.fixed_direction = Some(direction);
        self
    }

    fn validate(&self, space: &NormedSpace) -> Result<()> {
        match &self.kind {
            PerturbationKind::Bounded { epsilon } if !(*epsilon >= 0.0) => {
                return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
            }
            PerturbationKind::Power { theta, r } if !(*theta >= 0.0) || !r.is_finite() => {
                return Err(Error::Config(format!(
                    "power perturbation needs theta >= 0 and finite r, got theta={theta} r={r}"
                )));
            }
            PerturbationKind::Tabulated(t) => t.validate(space.dim())?,
            _ => {}
        }
        if let Some(u) = &self.fixed_direction {
            space.check(u)?;
            if !(space.norm_unchecked(u) > 0.0) {
                return Err(Error::Config("fixed_direction must be nonzero".into()));
            }
        }
        Ok(())
    }

    /// Unit vector (in the space norm) attached to `x`, plus a hashed value
    /// in `[0, 1)` used by the bounded kind.
    fn direction(&self, space: &NormedSpace, x: &CVector) -> (CVector, f64) {
        let h = hash_point(x, self.direction_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let unit_scale = (splitmix64(h ^ 0xa076_1d64_78bd_642f) >> 11) as f64 / (1u64 << 53) as f64;
        let raw = match &self.fixed_direction {
            Some(u) => u.clone(),
            None => loop {
                let v = random_direction(&mut rng, space.dim());
                if space.norm_unchecked(&v) > 0.0 {
                    break v;
                }
            },
        };
        let n = space.norm_unchecked(&raw);
        (raw.scale(1.0 / n), unit_scale)
    }

    pub fn evaluate(&self, space: &NormedSpace, x: &CVector) -> Result<CVector> {
        match &self.kind {
            PerturbationKind::None => Ok(space.zero()),
            PerturbationKind::Bounded { epsilon } => {
                let (u, s) = self.direction(space, x);
                Ok(u.scale(epsilon * s))
            }
            PerturbationKind::Power { theta, r } => {
                let n = space.norm_unchecked(x);
                if n == 0.0 {
                    if *r > 0.0 || *theta == 0.0 {
                        return Ok(space.zero());
                    }
                    if *r < 0.0 {
                        return Err(Error::SingularPoint { r: *r });
                    }
                }
                let (u, _) = self.direction(space, x);
                Ok(u.scale(theta * n.powf(*r)))
            }
            PerturbationKind::Tabulated(t) => {
                Ok(t.lookup(x).cloned().unwrap_or_else(|| space.zero()))
            }
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_point(x: &CVector, seed: u64) -> u64 {
    // rounding in f64 keeps huge orbit arguments distinct where i64 would saturate
    x.to_real().into_iter().fold(splitmix64(seed), |h, v| {
        let q = (v / DEFAULT_QUANTUM).round() + 0.0;
        splitmix64(h ^ q.to_bits())
    })
}

/// The mapping `f: X -> Y` under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TestFunctionSpec")]
pub struct TestFunction {
    space: NormedSpace,
    core: AdditiveCore,
    perturbation: Perturbation,
    force_zero_at_origin: bool,
}

#[derive(Deserialize)]
struct TestFunctionSpec {
    space: NormedSpace,
    core: AdditiveCore,
    #[serde(default = "Perturbation::none")]
    perturbation: Perturbation,
    #[serde(default)]
    force_zero_at_origin: bool,
}

impl TryFrom<TestFunctionSpec> for TestFunction {
    type Error = Error;
    fn try_from(s: TestFunctionSpec) -> Result<TestFunction> {
        TestFunction::new(s.space, s.core, s.perturbation, s.force_zero_at_origin)
    }
}

impl TestFunction {
    pub fn new(
        space: NormedSpace,
        core: AdditiveCore,
        perturbation: Perturbation,
        force_zero_at_origin: bool,
    ) -> Result<Self> {
        space.validate_dims()?;
        core.validate(space.dim())?;
        perturbation.validate(&space)?;
        Ok(TestFunction {
            space,
            core,
            perturbation,
            force_zero_at_origin,
        })
    }

    /// An exactly additive function.
    pub fn additive(space: NormedSpace, core: AdditiveCore) -> Result<Self> {
        TestFunction::new(space, core, Perturbation::none(), false)
    }

    /// Scalar model `f(x) = x + c` on `C^1`.
    pub fn shifted_identity(space: NormedSpace, c: Complex64) -> Result<Self> {
        let offset = CVector::new(vec![c; space.dim()]);
        TestFunction::new(
            space,
            AdditiveCore::Identity,
            Perturbation::constant(offset),
            false,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    pub fn core(&self) -> &AdditiveCore {
        &self.core
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    pub fn force_zero_at_origin(&self) -> bool {
        self.force_zero_at_origin
    }

    pub fn with_force_zero_at_origin(mut self, on: bool) -> Self {
        self.force_zero_at_origin = on;
        self
    }

    pub fn evaluate(&self, x: &CVector) -> Result<CVector> {
        self.space.check(x)?;
        if self.force_zero_at_origin && x.is_zero() {
            return Ok(self.space.zero());
        }
        let p = self.perturbation.evaluate(&self.space, x)?;
        Ok(&self.core.apply(x) + &p)
    }

    /// The additive part alone, i.e. the limit every convergent scheme
    /// should reach for sublinear or superlinear perturbations.
    pub fn core_value(&self, x: &CVector) -> Result<CVector> {
        self.space.check(x)?;
        Ok(self.core.apply(x))
    }

    pub fn norm(&self, v: &CVector) -> Result<f64> {
        self.space.norm_of(v)
    }
}

/// `‖f(x+y) - f(x) - f(y)‖`.
pub fn additivity_defect(f: &TestFunction, x: &CVector, y: &CVector) -> Result<f64> {
    let fx = f.evaluate(x)?;
    let fy = f.evaluate(y)?;
    let fxy = f.evaluate(&(x + y))?;
    f.norm(&(&(&fxy - &fx) - &fy))
}
