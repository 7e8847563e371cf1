//! Experimental toolkit for delta-convex and delta-semidefinite quadratic
//! forms on finite-dimensional normed spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`dyadic`]: the cube `{-1,1}^n` with its dyadic filtration and
//!   (conditional) expectations over exhaustive tables.
//! * [`martingale`]: Walsh-Paley martingales, differences, transforms,
//!   maximal functions and stopping times.
//! * [`quadform`]: normed-space descriptors, symmetric operators, quadratic
//!   forms, second differences and the standard hard instances.
//! * [`dcgauge`]: lower-bound estimation of delta-convexity and UMD
//!   constants, the pairing identity behind the dc/UMD equivalence and a
//!   Bellman solver for control functions.
//! * [`factorize`]: dominating forms, Hilbert-space factorizations,
//!   delta-semidefinite decompositions and gamma-2 estimates.
//! * [`io`]: matrix CSV and witness dump formats.

pub mod dcgauge;
pub mod dyadic;
pub mod error;
pub mod factorize;
pub mod io;
pub(crate) mod linalg;
pub mod martingale;
pub mod quadform;

pub use error::{DclabError, Result};
