//! Finite-dimensional complex normed spaces.
//!
//! A [`NormedSpace`] is `C^d` with one of the l1, l2 or linf norms. Both the
//! domain and the codomain of every test function live in such a space.
//! Points are [`CVector`]s; reproducible random points come from
//! [`draw_samples`] driven by a [`SamplePlan`].

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower sampling bound used when a plan does not exclude the origin,
/// relative to the plan radius. Log-uniform radii need a positive floor.
pub const DEFAULT_INNER_RATIO: f64 = 1.0 / 65536.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub fn apply(self, coords: &[Complex64]) -> f64 {
        match self {
            NormKind::L1 => coords.iter().map(|c| c.norm()).sum(),
            // hypot chain avoids overflow for the large orbit arguments
            NormKind::L2 => coords
                .iter()
                .fold(0.0f64, |acc, c| acc.hypot(c.re).hypot(c.im)),
            NormKind::Linf => coords.iter().map(|c| c.norm()).fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormedSpace {
    dim: usize,
    #[serde(rename = "norm")]
    norm_kind: NormKind,
}

impl NormedSpace {
    pub fn new(dim: usize, norm_kind: NormKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension {
                expected: 1,
                got: 0,
            });
        }
        Ok(NormedSpace { dim, norm_kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn check(&self, v: &CVector) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: v.dim(),
            });
        }
        Ok(())
    }

    /// The selected norm of `v`.
    pub fn norm_of(&self, v: &CVector) -> Result<f64> {
        self.check(v)?;
        Ok(self.norm_kind.apply(&v.0))
    }

    /// Norm of a vector already known to belong to this space.
    pub(crate) fn norm_unchecked(&self, v: &CVector) -> f64 {
        self.norm_kind.apply(&v.0)
    }

    pub fn zero(&self) -> CVector {
        CVector::zeros(self.dim)
    }

    pub(crate) fn validate_dims(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Dimension {
                expected: 1,
                got: 0,
            });
        }
        Ok(())
    }
}

/// A point of `C^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CVector(Vec<Complex64>);

impl CVector {
    pub fn new(coords: Vec<Complex64>) -> Self {
        CVector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        CVector(vec![Complex64::new(0.0, 0.0); dim])
    }

    /// Builds a vector from real coordinates.
    pub fn real(coords: &[f64]) -> Self {
        CVector(coords.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    pub fn scalar(z: Complex64) -> Self {
        CVector(vec![z])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<Complex64> {
        self.0
    }

    pub fn scale(&self, s: f64) -> CVector {
        CVector(self.0.iter().map(|c| c * s).collect())
    }

    pub fn scale_complex(&self, s: Complex64) -> CVector {
        CVector(self.0.iter().map(|c| c * s).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &CVector) -> CVector {
        debug_assert_eq!(self.dim(), other.dim());
        CVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b * s)
                .collect(),
        )
    }

    /// Realified coordinates `[re_0, im_0, re_1, im_1, ...]`.
    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    /// Inverse of [`CVector::to_real`]. `coords.len()` must be even.
    pub fn from_real(coords: &[f64]) -> CVector {
        CVector(
            coords
                .chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        )
    }
}

impl Add for &CVector {
    type Output = CVector;
    fn add(self, rhs: &CVector) -> CVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &CVector {
    type Output = CVector;
    fn sub(self, rhs: &CVector) -> CVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &CVector {
    type Output = CVector;
    fn neg(self) -> CVector {
        CVector(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}{:+}i", c.re, c.im)?;
        }
        f.write_str(")")
    }
}

/// Absolute-plus-relative comparison regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            atol: 1e-12,
            rtol: 1e-9,
        }
    }
}

impl Tolerance {
    /// `|a - b| <= atol + rtol * max(|a|, |b|)`.
    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.atol + self.rtol * a.abs().max(b.abs())
    }

    /// `a <= b` up to the same slack.
    pub fn le(&self, a: f64, b: f64) -> bool {
        a <= b + self.atol + self.rtol * a.abs().max(b.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub seed: u64,
    pub count: usize,
    pub radius: f64,
    #[serde(default)]
    pub exclude_origin_below: f64,
}

impl SamplePlan {
    pub fn new(seed: u64, count: usize, radius: f64, exclude_origin_below: f64) -> Result<Self> {
        let plan = SamplePlan {
            seed,
            count,
            radius,
            exclude_origin_below,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.radius.is_finite()
            && self.exclude_origin_below.is_finite()
            && self.exclude_origin_below >= 0.0
            && self.radius > self.exclude_origin_below;
        if !ok {
            return Err(Error::InvalidPlan(format!(
                "need radius > exclude_origin_below >= 0, got radius={} exclude={}",
                self.radius, self.exclude_origin_below
            )));
        }
        Ok(())
    }

    /// Smallest norm the log-uniform radius law draws from.
    pub fn inner_radius(&self) -> f64 {
        if self.exclude_origin_below > 0.0 {
            self.exclude_origin_below
        } else {
            self.radius * DEFAULT_INNER_RATIO
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Points(Vec<CVector>),
    Triples(Vec<[CVector; 3]>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Points(p) => p.len(),
            Samples::Triples(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws `plan.count` points (arity 1) or argument triples (arity 3).
///
/// Directions are Gaussian vectors normalized in the space's own norm;
/// norms are log-uniform on `(inner, radius]` so that every dyadic shell of
/// the range gets roughly the same share of samples.
pub fn draw_samples(space: &NormedSpace, plan: &SamplePlan, arity: usize) -> Result<Samples> {
    plan.validate()?;
    space.validate_dims()?;
    let mut sampler = Sampler::new(space, plan);
    match arity {
        1 => Ok(Samples::Points(
            (0..plan.count).map(|_| sampler.next_vector()).collect(),
        )),
        3 => Ok(Samples::Triples(
            (0..plan.count)
                .map(|_| {
                    [
                        sampler.next_vector(),
                        sampler.next_vector(),
                        sampler.next_vector(),
                    ]
                })
                .collect(),
        )),
        other => Err(Error::Arity(other)),
    }
}

pub fn draw_points(space: &NormedSpace, plan: &SamplePlan) -> Result<Vec<CVector>> {
    match draw_samples(space, plan, 1)? {
        Samples::Points(p) => Ok(p),
        Samples::Triples(_) => unreachable!(),
    }
}

pub fn draw_triples(space: &NormedSpace, plan: &SamplePlan) -> Result<Vec<[CVector; 3]>> {
    match draw_samples(space, plan, 3)? {
        Samples::Triples(t) => Ok(t),
        Samples::Points(_) => unreachable!(),
    }
}

struct Sampler<'a> {
    space: &'a NormedSpace,
    rng: ChaCha8Rng,
    lo: f64,
    hi: f64,
    ln_lo: f64,
    ln_span: f64,
}

impl<'a> Sampler<'a> {
    fn new(space: &'a NormedSpace, plan: &SamplePlan) -> Self {
        let lo = plan.inner_radius();
        let hi = plan.radius;
        Sampler {
            space,
            rng: ChaCha8Rng::seed_from_u64(plan.seed),
            lo: plan.exclude_origin_below,
            hi,
            ln_lo: lo.ln(),
            ln_span: hi.ln() - lo.ln(),
        }
    }

    fn next_vector(&mut self) -> CVector {
        loop {
            let raw = random_direction(&mut self.rng, self.space.dim());
            let n = self.space.norm_unchecked(&raw);
            if !(n > 0.0) {
                continue;
            }
            // 1 - U lies in (0, 1], so the target norm lies in (inner, radius]
            let u = 1.0 - self.rng.random::<f64>();
            let target = (self.ln_lo + u * self.ln_span).exp().min(self.hi);
            let v = raw.scale(target / n);
            let m = self.space.norm_unchecked(&v);
            if m > self.lo && m <= self.hi && v.is_finite() {
                return v;
            }
        }
    }
}

pub(crate) fn random_direction<R: Rng>(rng: &mut R, dim: usize) -> CVector {
    CVector(
        (0..dim)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect(),
    )
}
