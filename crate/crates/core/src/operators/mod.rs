//! Sparse Hamiltonians and observables for the confinement problem.
//!
//! Full-space operators act on a Cartesian box around the curve; normal-bundle
//! operators act on `(s, y)` with `y = λn` in the flat inner product obtained
//! by conjugating with `a^{1/2}`. All operators are real symmetric.

mod cutoff;
mod frame;
mod fullspace;
mod grid;
mod matrix;
mod normal_bundle;
pub mod spectrum;

use std::f64::consts::TAU;

pub use cutoff::{cutoff_multiplier, smooth_below, smooth_step, Region};
pub use frame::CurveFrame;
pub use fullspace::{
    build_dirichlet_hamiltonian, build_fullspace_hamiltonian, dirichlet_hamiltonian_on,
    fullspace_hamiltonian_on, fullspace_resolution_limit,
};
pub use grid::{Axis, Boundary, Grid2D, GridKind, MIN_AXIS_COUNT};
pub use matrix::{Csr, CsrAssembler, OperatorMatrix, HERMITIAN_TOL};
pub use normal_bundle::{
    build_effective_hamiltonian, build_effective_hamiltonian_with, build_normalbundle_hamiltonian,
    build_normalbundle_hamiltonian_with, build_tangential_observable, check_normal_bundle_grid,
    geometric_potential, oscillator_1d, tangential_operator_1d, CurvatureTerms,
};

use crate::error::{Error, Result};
use crate::geometry::Curve;

/// Transverse frequency ω and the tangential potential amplitude v₀.
///
/// `W = ½ω²d²` in the plane and `½ω²n²` on the normal bundle;
/// `V(s) = v₀ cos(2πs/L_S)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfinementProfile {
    pub omega: f64,
    pub v0: f64,
}

impl Default for ConfinementProfile {
    fn default() -> Self {
        Self { omega: 1.0, v0: 0.5 }
    }
}

impl ConfinementProfile {
    pub fn new(omega: f64, v0: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::param("omega", format!("must be positive, got {omega}")));
        }
        if !v0.is_finite() {
            return Err(Error::param("v0", "must be finite"));
        }
        Ok(Self { omega, v0 })
    }

    /// V on the curve.
    pub fn tangential_potential(&self, curve: &Curve, s: f64) -> f64 {
        self.v0 * (TAU * s / curve.length()).cos()
    }

    /// W as a function of the distance to the curve.
    pub fn confinement(&self, distance: f64) -> f64 {
        0.5 * self.omega * self.omega * distance * distance
    }

    /// V extended to the plane: V(s*(x)), switched off smoothly between half
    /// the reach and the reach of the curve, where s* stops being smooth.
    pub fn fullspace_potential(&self, curve: &Curve, distance: f64, s_star: f64) -> f64 {
        let reach = 1.0 / curve.max_abs_curvature().max(1e-300);
        self.tangential_potential(curve, s_star) * smooth_below(distance, reach, 0.5 * reach)
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be >= 1, got {lambda}")));
    }
    Ok(())
}
