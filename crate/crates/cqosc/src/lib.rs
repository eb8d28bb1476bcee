//! Numerical toolkit for a quantum oscillator coupled to a classical one.
//!
//! The classical sector diffuses while the doubled quantum sector (bra and
//! ket branches) decoheres; trajectories are weighted by a complex action.
//! The crate provides:
//!
//! - [`model`]: domain types, discrete calculus, and evaluation of the
//!   action in both algebraic conventions;
//! - [`mpp`]: boundary-pinned saddle solutions of the quantum branches,
//!   most-probable-path solutions of the classical sector, residual checks,
//!   and the on-shell propagator exponent;
//! - [`lattice`]: an independent brute-force oracle — the action as a
//!   complex quadratic form with Gaussian moments and log-partition values,
//!   plus a Langevin sampler for the diffusive classical sector;
//! - [`correlators`]: closed-form and quadrature free propagators and the
//!   second-order coupling corrections;
//! - [`checks`]: oracle-equivalence suites tying the above together.
//!
//! With the default `parallel` feature, ensembles, scans, and quadrature
//! tiles run on rayon; outputs are bit-identical to the sequential build
//! at any thread count.

pub mod checks;
pub mod correlators;
pub mod error;
pub mod io;
pub mod lattice;
pub mod model;
pub mod mpp;
pub mod parallel;

pub use error::{Error, Result};
