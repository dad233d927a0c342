//! Metastability analysis for one-dimensional diffusions
//! `dX = b(X) dt + sqrt(2 eps) dW` on the circle with a drift of positive mean.
//!
//! The pipeline runs from a Fourier drift ([`drift`]) through the
//! quasi-potential and its landscape decomposition ([`landscape`]), the
//! stationary density and its sharp asymptotics ([`stationary`]), capacities
//! between wells ([`capacity`]), the reduced Markov chain on the deepest wells
//! ([`chain`]) and the Poisson equation ([`poisson`]), with Monte Carlo
//! cross-checks in [`simulate`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod chain;
pub mod drift;
pub mod error;
pub mod landscape;
pub mod laplace;
pub mod poisson;
pub mod simulate;
pub mod stationary;

pub use drift::{CriticalKind, CriticalPoint, DriftModel, DriftSpec};
pub use error::{Error, Result};
