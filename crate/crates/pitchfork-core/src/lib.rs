//! Numerical detection and classification of pitchfork-type bifurcations.
//!
//! Given a one-parameter family of vector fields `V(x, eps)` on R^n, this
//! crate locates equilibria, computes topological indices and a local center
//! manifold reduction, and checks four pointwise conditions (P0-P3) that
//! decide whether the family undergoes a pitchfork (1->3 / 3->1) or
//! pitchfork-type (1->k / k->1) bifurcation at a given point. Theory-based
//! verdicts are cross-validated against brute-force equilibrium counting.
//!
//! The crate is `no_std` (with `alloc`); IO, the problem-file CLI and CSV
//! output live in the companion `pitchfork-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod centerman;
pub mod criteria;
pub mod equilibria;
pub mod error;
pub mod field;
pub mod index;
mod rng;
pub mod smallmat;

pub use error::Error;
pub use field::{FieldSpec, Jet3, Problem};
pub use smallmat::{Matrix, Spectrum};

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
