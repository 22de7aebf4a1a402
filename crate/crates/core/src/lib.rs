//! Constructive machinery behind randomized and quantum lower bounds for
//! k-th order scalar initial-value problems `u^(k) = g(x, u, ..., u^(q))`.
//!
//! The crate is organised bottom-up:
//!
//! - [`poly`]: piecewise polynomials in a local power basis, with exact
//!   derivatives, antiderivatives and critical-point sup norms.
//! - [`model`]: problem and function-class types, the reduction to a
//!   first-order system, cost accounting and sup-norm errors.
//! - [`quadrature`]: adaptive Gauss-Kronrod quadrature and the brute-force
//!   k-fold integral oracle used throughout the tests.
//! - [`bspline`]: perfect B-splines built from the sign pattern of the
//!   Chebyshev polynomial of the second kind, scaled bumps, bump families
//!   and their closed-form iterated integrals.
//! - [`reduction`]: shift mappings, Vandermonde weights and mean recovery
//!   from k integral values, plus query lower-bound calculators.
//! - [`solvers`]: deterministic interpolatory and randomized control-variate
//!   k-fold integrators, and an RK4 reference integrator.
//! - [`harness`]: verification suites, rate experiments, the end-to-end
//!   adversary pipeline and report emission.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bspline;
pub mod error;
pub mod harness;
pub mod model;
pub mod poly;
pub mod quadrature;
pub mod reduction;
pub mod solvers;

pub use error::{Error, Result};
