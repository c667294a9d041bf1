//! Numerical verification of Hyers-Ulam stability for the two 3-variable
//! Jensen ρ-functional inequalities on complex normed spaces.
//!
//! The pipeline runs bottom-up:
//!
//! * [`space`]: finite-dimensional complex spaces, norms and seeded sampling.
//! * [`model`]: test functions `f = additive core + perturbation`.
//! * [`inequality`]: the two inequality families, defects and measured envelopes.
//! * [`direct_method`]: the approximant `A(x) = lim f(λⁿx)/λⁿ` and its variants.
//! * [`bounds`]: control functions, error series and stability constants.
//! * [`harness`]: configured runs, sweeps and bit-stable reports.
//!
//! ```
//! use jensen_lab::direct_method::{approximate, Direction, Scheme};
//! use jensen_lab::model::TestFunction;
//! use jensen_lab::space::{CVector, NormKind, NormedSpace};
//! use num_complex::Complex64;
//!
//! let space = NormedSpace::new(1, NormKind::L2).unwrap();
//! let f = TestFunction::shifted_identity(space, Complex64::new(0.5, 0.0)).unwrap();
//! let x = CVector::real(&[3.0]);
//! let rep = approximate(&f, &x, &Scheme::dyadic(Direction::Forward), 1e-12, 200).unwrap();
//! assert!(rep.converged);
//! assert!((rep.value.coords()[0].re - 3.0).abs() < 1e-11);
//! ```

// `!(a < b)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod direct_method;
pub mod error;
pub mod harness;
pub mod inequality;
pub mod model;
pub mod space;

pub use error::{Error, Result};
pub use num_complex::Complex64;
