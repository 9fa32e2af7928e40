//! Brownian dynamics with partially reflecting (reactive) boundaries.
//!
//! The Euler scheme terminates a boundary-crossing trajectory with
//! probability `P sqrt(dt)` and reflects it otherwise; in the limit this
//! yields the Robin condition `-J.n = kappa p` with
//! `kappa = P sqrt(sigma_n) / sqrt(pi)`. Reference solutions (closed forms
//! and Crank-Nicolson solvers) and boundary-layer diagnostics live
//! alongside the simulators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic1d;
pub mod blverify;
pub mod coefficients;
pub mod error;
pub mod euler1d;
pub mod euler_nd;
pub mod fpe;
pub mod harness;
pub mod histogram;
pub mod parallel;
pub mod quadrature;
pub mod sparse;
pub mod special;

pub use error::{Error, Result};
