//! Globally optimal training of threshold-activation networks.
//!
//! Regularized training of a network with activation `σ_s(x) = s·1{x >= 0}`
//! is equivalent to a Lasso whose design columns are hyperplane arrangement
//! patterns of the data. This crate enumerates those patterns, solves the
//! convex problem, rebuilds explicit networks from the solution and compares
//! against straight-through-estimator training.

// `!(x > 0.0)` is how NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrangements;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod reconstruct;
pub mod solver;
pub mod ste;

pub use error::{Error, Result};
