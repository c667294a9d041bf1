//! Runs the guide's code listings as doc-tests.
//!
//! mdbook cannot test listings that depend on external crates, so each
//! chapter is included here as the docs of an empty module and checked by
//! `cargo test --doc`. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/spaces.md")]
pub mod spaces {}
#[doc = include_str!("../../../book/src/test-functions.md")]
pub mod test_functions {}
#[doc = include_str!("../../../book/src/inequalities.md")]
pub mod inequalities {}
#[doc = include_str!("../../../book/src/direct-method.md")]
pub mod direct_method {}
#[doc = include_str!("../../../book/src/bounds.md")]
pub mod bounds {}
#[doc = include_str!("../../../book/src/audit.md")]
pub mod audit {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
