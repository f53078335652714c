//! Quantum dynamics of a particle confined near a closed plane curve by a
//! strong potential `λ⁴W`, and the measurements that quantify the
//! `λ → ∞` limit.
//!
//! - [`geometry`]: arclength-parameterized curves, tube coordinates, distance.
//! - [`operators`]: full-space, Dirichlet, normal-bundle and effective
//!   Hamiltonians, the tangential observable Q̄ and cutoff multipliers.
//! - [`propagation`]: Crank–Nicolson time stepping and standard initial states.
//! - [`diagnostics`]: cutoff masses, overlaps, moments, q(t), rate fits.
//! - [`oracles`]: independent references used to validate the rest.
//! - [`harness`]: configuration, λ sweeps, CSV/JSON output, fits and plots.

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod operators;
pub mod oracles;
pub mod propagation;

pub use error::{Error, Result};
