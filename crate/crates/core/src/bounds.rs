//! Control functions, error series and closed-form stability constants.
//!
//! For a scheme with step bound `‖f(x) − term₁(x)‖ <= ψ(x)` the telescoping
//! estimate gives `‖f(x) − A(x)‖ <= Σᵢ wᵢ ψ(orbitᵢ(x))`. [`phi_tilde`] sums
//! that series term by term for an arbitrary control φ, and adds the exact
//! geometric remainder when φ is a power law. The corollary constants of the
//! four schemes are available both as printed ([`corollary_constant`]) and
//! as the closed form of the series ([`derived_constant`]); [`audit`]
//! compares the two against measured deviations.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::direct_method::{approximate, Direction, Scheme};
use crate::error::{Error, Result};
use crate::inequality::{Family, RhoParams};
use crate::model::TestFunction;
use crate::space::{CVector, NormedSpace};

pub const DEFAULT_TRUNC_TERMS: usize = 64;
pub const AUDIT_RTOL: f64 = 1e-6;

/// A remainder estimate that may not exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    Finite(f64),
    Unavailable,
}

impl Tail {
    pub fn value_or_zero(self) -> f64 {
        match self {
            Tail::Finite(v) => v,
            Tail::Unavailable => 0.0,
        }
    }
}

impl Serialize for Tail {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tail::Finite(v) => s.serialize_f64(*v),
            Tail::Unavailable => s.serialize_str("unavailable"),
        }
    }
}

/// A stability constant, or the statement that its series diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constant {
    Finite(f64),
    Divergent,
}

impl Constant {
    pub fn finite(self) -> Option<f64> {
        match self {
            Constant::Finite(v) => Some(v),
            Constant::Divergent => None,
        }
    }
}

impl Serialize for Constant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Constant::Finite(v) => s.serialize_f64(*v),
            Constant::Divergent => s.serialize_str("divergent"),
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Finite(v) => write!(f, "{v}"),
            Constant::Divergent => f.write_str("divergent"),
        }
    }
}

/// Least-squares fit of `defect ≈ θ(‖x‖ʳ + ‖y‖ʳ + ‖z‖ʳ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub theta: f64,
    pub r: f64,
}

impl PowerFit {
    /// Fits on relative residuals `d / s(r) − θ`, so every norm shell
    /// carries equal weight. `θ` is closed-form for fixed `r`; `r` is found
    /// by a grid scan over `[-1, 3]` refined with golden-section search.
    pub fn fit(observations: &[([f64; 3], f64)]) -> PowerFit {
        let usable: Vec<_> = observations
            .iter()
            .filter(|(n, _)| n.iter().any(|&v| v > 0.0))
            .collect();
        if usable.is_empty() || usable.iter().all(|(_, d)| *d == 0.0) {
            return PowerFit { theta: 0.0, r: 0.0 };
        }
        let cost = |r: f64| -> (f64, f64) {
            let ratios: Vec<f64> = usable
                .iter()
                .map(|(n, d)| d / power_sum(n, r))
                .collect();
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let var = ratios.iter().map(|q| (q - mean).powi(2)).sum::<f64>();
            // normalized so the cost is comparable across r
            (var / (mean * mean).max(f64::MIN_POSITIVE), mean)
        };
        let step = 0.01;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=400 {
            let r = -1.0 + k as f64 * step;
            let (c, _) = cost(r);
            if c < best.0 {
                best = (c, r);
            }
        }
        let (mut a, mut b) = (best.1 - step, best.1 + step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if cost(c).0 <= cost(d).0 {
                b = d;
            } else {
                a = c;
            }
        }
        let r = 0.5 * (a + b);
        let r = if cost(r).0 <= best.0 { r } else { best.1 };
        PowerFit {
            theta: cost(r).1,
            r,
        }
    }
}

fn power_sum(norms: &[f64; 3], r: f64) -> f64 {
    norms.iter().map(|&t| if t > 0.0 { t.powf(r) } else { 0.0 }).sum()
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// A shell table: a monotone step function of the largest argument norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvelopeSpec")]
pub struct Envelope {
    edges: Vec<f64>,
    maxima: Vec<f64>,
    #[serde(skip_serializing)]
    running: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<PowerFit>,
}

#[derive(Deserialize)]
struct EnvelopeSpec {
    edges: Vec<f64>,
    #[serde(alias = "values")]
    maxima: Vec<f64>,
    #[serde(default)]
    fit: Option<PowerFit>,
}

impl TryFrom<EnvelopeSpec> for Envelope {
    type Error = Error;
    fn try_from(s: EnvelopeSpec) -> Result<Envelope> {
        Envelope::from_table(s.edges, s.maxima, s.fit)
    }
}

impl Envelope {
    /// Shell `k` of `shells` log-spaced shells on `[lo, hi]` containing `t`.
    pub fn shell_index(lo: f64, hi: f64, shells: usize, t: f64) -> usize {
        if t <= lo {
            return 0;
        }
        let k = (shells as f64 * (t / lo).ln() / (hi / lo).ln()).floor();
        (k.max(0.0) as usize).min(shells - 1)
    }

    pub fn from_shell_maxima(lo: f64, hi: f64, maxima: Vec<f64>, fit: PowerFit) -> Result<Self> {
        let shells = maxima.len();
        let edges = (0..=shells)
            .map(|k| {
                if k == shells {
                    hi
                } else {
                    lo * (hi / lo).powf(k as f64 / shells as f64)
                }
            })
            .collect();
        Envelope::from_table(edges, maxima, Some(fit))
    }

    pub fn from_table(edges: Vec<f64>, maxima: Vec<f64>, fit: Option<PowerFit>) -> Result<Self> {
        let ok = !maxima.is_empty()
            && edges.len() == maxima.len() + 1
            && edges.windows(2).all(|w| w[0] < w[1])
            && edges[0] >= 0.0
            && maxima.iter().all(|&m| m >= 0.0 && m.is_finite());
        if !ok {
            return Err(Error::Config(
                "shell table needs increasing edges, one more edge than values, values >= 0".into(),
            ));
        }
        let running = maxima
            .iter()
            .scan(0.0f64, |acc, &m| {
                *acc = acc.max(m);
                Some(*acc)
            })
            .collect();
        Ok(Envelope {
            edges,
            maxima,
            running,
            fit,
        })
    }

    pub fn shell_maxima(&self) -> &[f64] {
        &self.maxima
    }

    pub fn shell_upper_edges(&self) -> &[f64] {
        &self.edges[1..]
    }

    pub fn coverage(&self) -> (f64, f64) {
        (self.edges[0], *self.edges.last().unwrap())
    }

    pub fn fit(&self) -> PowerFit {
        self.fit.unwrap_or(PowerFit { theta: 0.0, r: 0.0 })
    }

    pub fn has_fit(&self) -> bool {
        self.fit.is_some()
    }

    /// Envelope value at largest-argument norm `t`; `None` outside coverage.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let (lo, hi) = self.coverage();
        let slack = 1e-12;
        if t > hi * (1.0 + slack) || t < lo * (1.0 - slack) {
            return None;
        }
        let k = self.edges[1..].partition_point(|&e| e < t);
        Some(self.running[k.min(self.running.len() - 1)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlFunction {
    Zero,
    /// `θ(‖x‖ʳ + ‖y‖ʳ + ‖z‖ʳ)`; a zero argument contributes nothing for `r >= 0`.
    Power { theta: f64, r: f64 },
    Tabulated(Envelope),
    Measured(Envelope),
}

impl ControlFunction {
    /// `φ(x, y, z)`, or `None` where a table does not reach.
    pub fn evaluate(
        &self,
        space: &NormedSpace,
        x: &CVector,
        y: &CVector,
        z: &CVector,
    ) -> Result<Option<f64>> {
        let norms = [space.norm_of(x)?, space.norm_of(y)?, space.norm_of(z)?];
        self.evaluate_norms(norms)
    }

    fn evaluate_norms(&self, norms: [f64; 3]) -> Result<Option<f64>> {
        Ok(match self {
            ControlFunction::Zero => Some(0.0),
            ControlFunction::Power { theta, r } => {
                let mut sum = 0.0;
                for t in norms {
                    if t == 0.0 {
                        if *r < 0.0 {
                            return Err(Error::SingularPoint { r: *r });
                        }
                    } else {
                        sum += t.powf(*r);
                    }
                }
                Some(theta * sum)
            }
            ControlFunction::Tabulated(e) | ControlFunction::Measured(e) => {
                e.value_at(norms.iter().copied().fold(0.0, f64::max))
            }
        })
    }

    fn validate(&self) -> Result<()> {
        if let ControlFunction::Power { theta, r } = self {
            if !(*theta >= 0.0 && theta.is_finite() && r.is_finite()) {
                return Err(Error::Config(format!(
                    "power control needs theta >= 0 and finite r, got theta={theta} r={r}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    Geometric,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub scheme: Scheme,
    pub rho2_abs: f64,
    /// Only read when `printed_display` selects the `1/(1−|ρ₁|)` weight.
    #[serde(default)]
    pub rho1_abs: f64,
    pub alpha: f64,
    pub trunc_terms: usize,
    pub tail_mode: TailMode,
    /// Reproduce the printed constant displays instead of the derivation:
    /// `φ(0,0,2ⁱx)` without `1/α` for the forward dyadic series and
    /// `1/(1−|ρ₁|)` for the forward `(1+β)` series.
    #[serde(default)]
    pub printed_display: bool,
}

impl SeriesSpec {
    pub fn new(scheme: Scheme, params: &RhoParams) -> Self {
        SeriesSpec {
            scheme,
            rho2_abs: params.rho2_abs(),
            rho1_abs: params.rho1_abs(),
            alpha: params.alpha,
            trunc_terms: DEFAULT_TRUNC_TERMS,
            tail_mode: TailMode::Geometric,
            printed_display: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail: Tail,
    pub terms: usize,
}

impl SeriesValue {
    pub fn total(&self) -> f64 {
        self.value + self.tail.value_or_zero()
    }
}

/// The weight in front of the series and the `(x, x, 0)` / `(0, 0, w)`
/// arguments of term `i`.
struct SeriesTerm {
    weight: f64,
    diag: CVector,
    /// Family A only: the argument of the oddness correction.
    odd: Option<(f64, CVector)>,
}

fn series_term(spec: &SeriesSpec, x: &CVector, i: usize) -> Result<SeriesTerm> {
    let lambda = spec.scheme.scale;
    let rho = spec.rho2_abs;
    let i_f = i as f64;
    match (spec.scheme.family, spec.scheme.direction) {
        (Family::A, dir) => {
            if lambda != 2.0 {
                return Err(Error::Scheme(format!(
                    "family A series needs the dyadic scale 2, got {lambda}"
                )));
            }
            let kappa = 2.0 * rho / (1.0 - rho);
            let (weight, diag) = match dir {
                Direction::Forward => (2f64.powi(-(i as i32 + 1)), x.scale(2f64.powi(i as i32))),
                Direction::Backward => (2f64.powi(i as i32), x.scale(2f64.powi(-(i as i32 + 1)))),
            };
            let odd = if spec.printed_display && dir == Direction::Forward {
                diag.clone()
            } else {
                diag.scale(1.0 / spec.alpha)
            };
            Ok(SeriesTerm {
                weight: weight / (2.0 - rho),
                diag,
                odd: Some((kappa, odd)),
            })
        }
        (Family::B, dir) => {
            let rho_w = if spec.printed_display && dir == Direction::Forward {
                spec.rho1_abs
            } else {
                rho
            };
            let (weight, diag) = match dir {
                Direction::Forward => (
                    lambda.abs().powf(-(i_f + 1.0)),
                    x.scale(lambda.powi(i as i32)),
                ),
                Direction::Backward => (
                    lambda.abs().powf(i_f),
                    x.scale(1.0 / lambda.powi(i as i32 + 1)),
                ),
            };
            Ok(SeriesTerm {
                weight: weight / (1.0 - rho_w),
                diag,
                odd: None,
            })
        }
    }
}

fn check_series_params(spec: &SeriesSpec) -> Result<()> {
    spec.scheme.validate()?;
    if spec.trunc_terms == 0 {
        return Err(Error::Config("trunc_terms must be >= 1".into()));
    }
    if !(spec.alpha != 0.0 && spec.alpha.is_finite()) {
        return Err(Error::DegenerateParameter(format!("alpha = {}", spec.alpha)));
    }
    if !(spec.rho2_abs < 1.0 && spec.rho2_abs >= 0.0) {
        return Err(Error::Inadmissible(format!(
            "|rho2| = {} must be < 1 for the series weights",
            spec.rho2_abs
        )));
    }
    let printed_b = spec.printed_display
        && spec.scheme.family == Family::B
        && spec.scheme.direction == Direction::Forward;
    if printed_b && !(spec.rho1_abs < 1.0) {
        return Err(Error::Inadmissible(format!(
            "|rho1| = {} must be < 1 for the printed weight",
            spec.rho1_abs
        )));
    }
    Ok(())
}

/// Truncated stability series at `x`, plus its remainder when known.
///
/// For power controls the remainder is the exact geometric tail and a term
/// ratio `>= 1` is reported as [`Error::Divergent`]. For shell tables the sum
/// stops where the orbit leaves the table and the tail is unavailable.
pub fn phi_tilde(
    phi: &ControlFunction,
    space: &NormedSpace,
    x: &CVector,
    spec: &SeriesSpec,
) -> Result<SeriesValue> {
    space.check(x)?;
    phi.validate()?;
    check_series_params(spec)?;
    if let ControlFunction::Zero = phi {
        return Ok(SeriesValue {
            value: 0.0,
            tail: Tail::Finite(0.0),
            terms: spec.trunc_terms,
        });
    }
    let ratio = match phi {
        ControlFunction::Power { r, .. } => {
            let p = convergence_predicate(&spec.scheme, *r)?;
            if !p.converges {
                return Err(Error::Divergent {
                    ratio: p.ratio,
                    condition: p.condition,
                });
            }
            if space.norm_of(x)? == 0.0 && *r < 0.0 {
                return Err(Error::SingularPoint { r: *r });
            }
            Some(p.ratio)
        }
        _ => None,
    };

    let zero = space.zero();
    let mut value = 0.0;
    let mut last = 0.0;
    let mut terms = 0;
    for i in 0..spec.trunc_terms {
        let t = series_term(spec, x, i)?;
        let Some(d) = phi.evaluate(space, &t.diag, &t.diag, &zero)? else {
            break;
        };
        let mut inner = d;
        if let Some((kappa, w)) = &t.odd {
            if *kappa != 0.0 {
                let Some(o) = phi.evaluate(space, &zero, &zero, w)? else {
                    break;
                };
                inner += kappa * o;
            }
        }
        let term = t.weight * inner;
        if !term.is_finite() {
            return Err(Error::Numeric(format!("non-finite series term at i={i}")));
        }
        value += term;
        last = term;
        terms += 1;
    }

    let tail = match (ratio, spec.tail_mode) {
        (Some(q), TailMode::Geometric) => Tail::Finite(last * q / (1.0 - q)),
        _ => Tail::Unavailable,
    };
    Ok(SeriesValue { value, tail, terms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corollary {
    /// Forward dyadic, `r < 1`.
    C24,
    /// Backward dyadic, `r > 1`.
    C26,
    /// Forward `(1+β)`, `|1+β| > 1`.
    C34,
    /// Backward `(1+β)`, `|1+β| < 1`.
    C36,
}

impl Corollary {
    pub fn for_scheme(scheme: &Scheme) -> Corollary {
        match (scheme.family, scheme.direction) {
            (Family::A, Direction::Forward) => Corollary::C24,
            (Family::A, Direction::Backward) => Corollary::C26,
            (Family::B, Direction::Forward) => Corollary::C34,
            (Family::B, Direction::Backward) => Corollary::C36,
        }
    }
}

impl fmt::Display for Corollary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Corollary::C24 => "c24",
            Corollary::C26 => "c26",
            Corollary::C34 => "c34",
            Corollary::C36 => "c36",
        })
    }
}

fn positive(value: f64, what: &str) -> Result<f64> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::OutOfRegime(format!("{what} = {value} is not positive")))
    }
}

/// The corollary constants exactly as printed.
///
/// * c24: `2θ / ((2−2ʳ)(1−|ρ₂|)(2−|ρ₂|))`
/// * c26: `2^(1+r)θ / ((2ʳ−1)(1−|ρ₂|)(2−|ρ₂|))`
/// * c34: `2θ / ((|1+β|−|1+β|ʳ)(1−|ρ₂|))`
/// * c36: `2θ / ((|1+β|ʳ−|1+β|)(1−|ρ₂|))`
pub fn corollary_constant(which: Corollary, theta: f64, r: f64, rho2_abs: f64, beta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::Config(format!("theta must be >= 0, got {theta}")));
    }
    let one_minus = positive(1.0 - rho2_abs, "1 - |rho2|")?;
    let lam = (1.0 + beta).abs();
    Ok(match which {
        Corollary::C24 => {
            let d = positive(2.0 - 2f64.powf(r), "2 - 2^r")?;
            let two_minus = positive(2.0 - rho2_abs, "2 - |rho2|")?;
            2.0 * theta / (d * one_minus * two_minus)
        }
        Corollary::C26 => {
            let d = positive(2f64.powf(r) - 1.0, "2^r - 1")?;
            let two_minus = positive(2.0 - rho2_abs, "2 - |rho2|")?;
            2f64.powf(1.0 + r) * theta / (d * one_minus * two_minus)
        }
        Corollary::C34 => {
            let d = positive(lam - lam.powf(r), "|1+beta| - |1+beta|^r")?;
            2.0 * theta / (d * one_minus)
        }
        Corollary::C36 => {
            let d = positive(lam.powf(r) - lam, "|1+beta|^r - |1+beta|")?;
            2.0 * theta / (d * one_minus)
        }
    })
}

/// Closed form of [`phi_tilde`] for `φ = θ(‖x‖ʳ+‖y‖ʳ+‖z‖ʳ)` at `‖x‖ = 1`.
pub fn derived_constant(spec: &SeriesSpec, theta: f64, r: f64) -> Result<Constant> {
    check_series_params(spec)?;
    let p = convergence_predicate(&spec.scheme, r)?;
    if !p.converges {
        return Ok(Constant::Divergent);
    }
    let rho = spec.rho2_abs;
    let lam = spec.scheme.scale.abs();
    Ok(Constant::Finite(match (spec.scheme.family, spec.scheme.direction) {
        (Family::A, dir) => {
            if spec.scheme.scale != 2.0 {
                return Err(Error::Scheme("family A needs the dyadic scale 2".into()));
            }
            let kappa = 2.0 * rho / (1.0 - rho);
            let alpha_factor = if spec.printed_display && dir == Direction::Forward {
                1.0
            } else {
                spec.alpha.abs().powf(-r)
            };
            let bracket = 2.0 + kappa * alpha_factor;
            match dir {
                Direction::Forward => theta * bracket / ((2.0 - rho) * (2.0 - 2f64.powf(r))),
                Direction::Backward => theta * bracket / ((2.0 - rho) * (2f64.powf(r) - 2.0)),
            }
        }
        (Family::B, Direction::Forward) => {
            let w = if spec.printed_display { spec.rho1_abs } else { rho };
            2.0 * theta / ((1.0 - w) * (lam - lam.powf(r)))
        }
        (Family::B, Direction::Backward) => 2.0 * theta / ((1.0 - rho) * (lam.powf(r) - lam)),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predicate {
    pub converges: bool,
    /// Ratio of consecutive series terms for a power control.
    pub ratio: f64,
    pub condition: String,
}

/// Analytic convergence of the power-control series: the term ratio is
/// `|s|^(r−1)` with `s` the kernel's argument step.
pub fn convergence_predicate(scheme: &Scheme, r: f64) -> Result<Predicate> {
    scheme.validate()?;
    let lam = scheme.scale.abs();
    let (ratio, condition) = match scheme.direction {
        Direction::Forward => (
            lam.powf(r - 1.0),
            format!("|lambda|^(r-1) = {lam}^({r}-1) < 1"),
        ),
        Direction::Backward => (
            lam.powf(1.0 - r),
            format!("|lambda|^(1-r) = {lam}^(1-{r}) < 1"),
        ),
    };
    Ok(Predicate {
        converges: ratio < 1.0,
        ratio,
        condition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Consistent,
    Mismatched,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundAudit {
    pub which: Corollary,
    pub theta: f64,
    pub r: f64,
    pub rho2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub paper_constant: Constant,
    pub derived_constant: Constant,
    pub empirical_sup: f64,
    pub convergence: Predicate,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl BoundAudit {
    pub fn empirical_within_derived(&self) -> bool {
        self.verdicts.get("empirical_le_derived") != Some(&Verdict::Fail)
    }
}

fn le_rel(a: f64, b: f64) -> bool {
    a <= b + AUDIT_RTOL * b.abs().max(a.abs()) + f64::MIN_POSITIVE
}

/// Cross-validates the printed corollary constant, the series closed form
/// and the observed `sup ‖f(x) − A(x)‖ / ‖x‖ʳ` over `points`.
pub fn audit(
    f: &TestFunction,
    params: &RhoParams,
    scheme: &Scheme,
    phi: &ControlFunction,
    points: &[CVector],
    tol: f64,
    max_n: u32,
) -> Result<BoundAudit> {
    let ControlFunction::Power { theta, r } = *phi else {
        return Err(Error::Config("audit needs a power control".into()));
    };
    phi.validate()?;
    let which = Corollary::for_scheme(scheme);
    let rho2 = params.rho2_abs();
    let paper = match corollary_constant(which, theta, r, rho2, params.beta) {
        Ok(v) => Constant::Finite(v),
        Err(Error::OutOfRegime(_)) => Constant::Divergent,
        Err(e) => return Err(e),
    };
    let spec = SeriesSpec::new(*scheme, params);
    let derived = derived_constant(&spec, theta, r)?;
    let convergence = convergence_predicate(scheme, r)?;

    let mut empirical_sup = 0.0f64;
    for x in points {
        let norm = f.norm(x)?;
        if norm == 0.0 {
            continue;
        }
        let rep = approximate(f, x, scheme, tol, max_n)?;
        if !rep.converged {
            return Err(Error::NotConverged {
                scheme: scheme.label(),
                point: x.to_string(),
            });
        }
        let dev = f.norm(&(&f.evaluate(x)? - &rep.value))?;
        empirical_sup = empirical_sup.max(dev / norm.powf(r));
    }

    let check = |c: Constant| match c {
        Constant::Finite(v) if le_rel(empirical_sup, v) => Verdict::Pass,
        Constant::Finite(_) => Verdict::Fail,
        Constant::Divergent => Verdict::NotApplicable,
    };
    let agreement = match (paper, derived) {
        (Constant::Finite(p), Constant::Finite(d)) if (p - d).abs() <= AUDIT_RTOL * p.abs().max(d.abs()) => {
            Verdict::Consistent
        }
        (Constant::Divergent, Constant::Divergent) => Verdict::Consistent,
        _ => Verdict::Mismatched,
    };
    let mut verdicts = BTreeMap::new();
    verdicts.insert("empirical_le_derived".to_string(), check(derived));
    verdicts.insert("empirical_le_paper".to_string(), check(paper));
    verdicts.insert("derived_vs_paper".to_string(), agreement);

    Ok(BoundAudit {
        which,
        theta,
        r,
        rho2,
        alpha: params.alpha,
        beta: params.beta,
        paper_constant: paper,
        derived_constant: derived,
        empirical_sup,
        convergence,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdditiveCore, Perturbation};
    use crate::space::NormKind;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn unit_x() -> (NormedSpace, CVector) {
        (NormedSpace::new(2, NormKind::L2).unwrap(), CVector::real(&[0.6, 0.8]))
    }

    fn spec_a(dir: Direction, rho2: f64) -> SeriesSpec {
        SeriesSpec::new(Scheme::dyadic(dir), &RhoParams::family_a(c(0.0), c(rho2), 1.0))
    }

    #[test]
    fn zero_control_gives_zero() {
        let (s, x) = unit_x();
        for dir in [Direction::Forward, Direction::Backward] {
            let v = phi_tilde(&ControlFunction::Zero, &s, &x, &spec_a(dir, 0.4)).unwrap();
            assert_eq!(v.value, 0.0);
            assert_eq!(v.tail, Tail::Finite(0.0));
        }
    }

    #[test]
    fn forward_dyadic_examples() {
        let (s, x) = unit_x();
        let phi = ControlFunction::Power { theta: 1.0, r: 0.5 };
        let v = phi_tilde(&phi, &s, &x, &spec_a(Direction::Forward, 0.0)).unwrap();
        assert_relative_eq!(v.total(), 1.0 / (2.0 - 2f64.sqrt()), max_relative = 1e-12);
        assert_relative_eq!(v.total(), 1.707107, epsilon = 1e-6);
        let v = phi_tilde(&phi, &s, &x, &spec_a(Direction::Forward, 0.5)).unwrap();
        assert_relative_eq!(v.total(), 4.552285, epsilon = 1e-6);
    }

    #[test]
    fn corollary_examples() {
        assert_relative_eq!(corollary_constant(Corollary::C24, 1.0, 0.5, 0.0, 0.0).unwrap(), 1.707107, epsilon = 1e-6);
        assert_eq!(corollary_constant(Corollary::C24, 0.0, 0.5, 0.3, 0.0).unwrap(), 0.0);
        assert_relative_eq!(corollary_constant(Corollary::C34, 1.0, 0.5, 0.0, 1.0).unwrap(), 3.414214, epsilon = 1e-6);
        assert_relative_eq!(corollary_constant(Corollary::C26, 1.0, 2.0, 0.0, 0.0).unwrap(), 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_regime_names_the_inequality() {
        let e = corollary_constant(Corollary::C24, 1.0, 1.0, 0.0, 0.0).unwrap_err();
        assert!(e.to_string().contains("2 - 2^r"));
        let e = corollary_constant(Corollary::C34, 1.0, 2.0, 0.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("|1+beta| - |1+beta|^r"));
        let e = corollary_constant(Corollary::C36, 1.0, 2.0, 1.2, -0.5).unwrap_err();
        assert!(e.to_string().contains("1 - |rho2|"));
    }

    #[test]
    fn predicate_examples() {
        let fwd = Scheme::dyadic(Direction::Forward);
        assert!(convergence_predicate(&fwd, 0.5).unwrap().converges);
        let edge = convergence_predicate(&fwd, 1.0).unwrap();
        assert!(!edge.converges);
        assert_eq!(edge.ratio, 1.0);
        let b = Scheme::beta(Direction::Forward, 1.0).unwrap();
        let p = convergence_predicate(&b, 2.0).unwrap();
        assert!(!p.converges);
        assert_eq!(p.ratio, 2.0);
        assert!(convergence_predicate(&Scheme::dyadic(Direction::Backward), 2.0).unwrap().converges);
    }

    #[test]
    fn divergent_and_inadmissible_series() {
        let (s, x) = unit_x();
        let phi = ControlFunction::Power { theta: 1.0, r: 2.0 };
        let e = phi_tilde(&phi, &s, &x, &spec_a(Direction::Forward, 0.0)).unwrap_err();
        assert!(matches!(e, Error::Divergent { .. }));
        let e = phi_tilde(&phi, &s, &x, &spec_a(Direction::Backward, 1.0)).unwrap_err();
        assert!(matches!(e, Error::Inadmissible(_)));
    }

    #[test]
    fn singular_point() {
        let s = NormedSpace::new(1, NormKind::L2).unwrap();
        let phi = ControlFunction::Power { theta: 1.0, r: -0.5 };
        let e = phi_tilde(&phi, &s, &CVector::zeros(1), &spec_a(Direction::Forward, 0.0)).unwrap_err();
        assert!(matches!(e, Error::SingularPoint { .. }));
    }

    #[test]
    fn backward_dyadic_matches_telescoping_constant() {
        let (s, x) = unit_x();
        let phi = ControlFunction::Power { theta: 1.0, r: 2.0 };
        let v = phi_tilde(&phi, &s, &x, &spec_a(Direction::Backward, 0.0)).unwrap();
        assert_relative_eq!(v.total(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn alpha_enters_the_dyadic_series() {
        let (s, x) = unit_x();
        let phi = ControlFunction::Power { theta: 1.0, r: 0.5 };
        let params = RhoParams::family_a(c(0.0), c(0.5), 4.0);
        let mut spec = SeriesSpec::new(Scheme::dyadic(Direction::Forward), &params);
        let derived = phi_tilde(&phi, &s, &x, &spec).unwrap().total();
        let printed_c24 = corollary_constant(Corollary::C24, 1.0, 0.5, 0.5, 0.0).unwrap();
        assert!(derived < printed_c24);
        assert_relative_eq!(derived, derived_constant(&spec, 1.0, 0.5).unwrap().finite().unwrap(), max_relative = 1e-12);
        spec.printed_display = true;
        let printed = phi_tilde(&phi, &s, &x, &spec).unwrap().total();
        assert_relative_eq!(printed, printed_c24, max_relative = 1e-12);
    }

    #[test]
    fn printed_display_beta_uses_rho1() {
        let (s, x) = unit_x();
        let phi = ControlFunction::Power { theta: 1.0, r: 0.5 };
        let params = RhoParams::family_b(c(0.5), c(0.2), 1.0, 1.0);
        let mut spec = SeriesSpec::new(Scheme::beta(Direction::Forward, 1.0).unwrap(), &params);
        let derived = phi_tilde(&phi, &s, &x, &spec).unwrap().total();
        assert_relative_eq!(derived, corollary_constant(Corollary::C34, 1.0, 0.5, 0.2, 1.0).unwrap(), max_relative = 1e-12);
        spec.printed_display = true;
        let printed = phi_tilde(&phi, &s, &x, &spec).unwrap().total();
        assert_relative_eq!(printed, derived * (1.0 - 0.2) / (1.0 - 0.5), max_relative = 1e-12);
    }

    #[test]
    fn tabulated_series_stops_at_coverage() {
        let s = NormedSpace::new(1, NormKind::L2).unwrap();
        let env = Envelope::from_table(vec![0.5, 1.0, 2.0, 4.0], vec![1.0, 0.5, 2.0], None).unwrap();
        // running maxima are 1, 1, 2
        assert_eq!(env.value_at(1.5), Some(1.0));
        assert_eq!(env.value_at(3.0), Some(2.0));
        assert_eq!(env.value_at(8.0), None);
        let phi = ControlFunction::Tabulated(env);
        let x = CVector::real(&[1.0]);
        let v = phi_tilde(&phi, &s, &x, &spec_a(Direction::Forward, 0.0)).unwrap();
        // terms at |x| = 1, 2, 4: weights 1/4, 1/8, 1/16 on values 1, 1(edge), 2
        assert_eq!(v.terms, 3);
        assert_relative_eq!(v.value, 0.25 * 1.0 + 0.125 * 1.0 + 0.0625 * 2.0, max_relative = 1e-12);
        assert_eq!(v.tail, Tail::Unavailable);
    }

    #[test]
    fn zero_arguments_contribute_nothing() {
        let s = NormedSpace::new(1, NormKind::L2).unwrap();
        let z = CVector::zeros(1);
        let x = CVector::real(&[2.0]);
        let phi = ControlFunction::Power { theta: 3.0, r: 0.0 };
        assert_eq!(phi.evaluate(&s, &x, &x, &z).unwrap(), Some(6.0));
        assert_eq!(phi.evaluate(&s, &z, &z, &z).unwrap(), Some(0.0));
    }

    #[test]
    fn audit_exact_function() {
        let s = NormedSpace::new(2, NormKind::L2).unwrap();
        let f = TestFunction::additive(s, AdditiveCore::random_complex(2, 1)).unwrap();
        let params = RhoParams::family_a(c(0.0), c(0.5), 1.0);
        let pts = vec![CVector::real(&[0.3, 0.4]), CVector::real(&[-1.0, 2.0])];
        let a = audit(&f, &params, &Scheme::dyadic(Direction::Forward), &ControlFunction::Power { theta: 1.0, r: 0.5 }, &pts, 1e-9, 200).unwrap();
        assert!(a.empirical_sup <= 1e-12);
        assert_eq!(a.verdicts["derived_vs_paper"], Verdict::Consistent);
        assert_eq!(a.verdicts["empirical_le_paper"], Verdict::Pass);
        assert_eq!(a.verdicts["empirical_le_derived"], Verdict::Pass);
        assert_relative_eq!(a.paper_constant.finite().unwrap(), 4.552285, epsilon = 1e-6);
    }

    #[test]
    fn audit_requires_power_control() {
        let s = NormedSpace::new(1, NormKind::L2).unwrap();
        let f = TestFunction::additive(s, AdditiveCore::Identity).unwrap();
        let params = RhoParams::family_a(c(0.0), c(0.0), 1.0);
        let e = audit(&f, &params, &Scheme::dyadic(Direction::Forward), &ControlFunction::Zero, &[], 1e-9, 10);
        assert!(matches!(e, Err(Error::Config(_))));
    }

    #[test]
    fn audit_backward_dyadic_mismatch() {
        let s = NormedSpace::new(2, NormKind::L2).unwrap();
        let f = TestFunction::new(s, AdditiveCore::Identity, Perturbation::power(0.5, 2.0, 0).with_fixed_direction(CVector::real(&[1.0, 0.0])), false).unwrap();
        let params = RhoParams::family_a(c(0.0), c(0.0), 1.0);
        let pts = vec![CVector::real(&[0.3, 0.9]), CVector::real(&[1.0, -1.0])];
        let a = audit(&f, &params, &Scheme::dyadic(Direction::Backward), &ControlFunction::Power { theta: 1.0, r: 2.0 }, &pts, 1e-12, 200).unwrap();
        assert_eq!(a.which, Corollary::C26);
        assert_relative_eq!(a.paper_constant.finite().unwrap(), 4.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(a.derived_constant.finite().unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(a.verdicts["derived_vs_paper"], Verdict::Mismatched);
        assert!(a.empirical_sup <= 0.5 + 1e-6);
    }
}
