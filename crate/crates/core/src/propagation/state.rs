//! Standard initial states: a periodized Gaussian wave packet along the curve
//! times the transverse oscillator ground state.

use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::WaveFunction;
use crate::error::{Error, Result};
use crate::geometry::{Curve, TubeParams};
use crate::operators::{
    check_normal_bundle_grid, fullspace_resolution_limit, smooth_below, ConfinementProfile, CurveFrame, Grid2D,
    GridKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpace {
    Fullspace,
    TubeDirichlet,
    NormalBundle,
}

impl FromStr for StateSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fullspace" => Ok(Self::Fullspace),
            "tube_dirichlet" => Ok(Self::TubeDirichlet),
            "normal_bundle" => Ok(Self::NormalBundle),
            other => Err(Error::param("space", format!("unknown state space `{other}`"))),
        }
    }
}

/// Tangential wave packet: momentum `k0`, position width `w_s`, centre `s0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateParams {
    pub k0: f64,
    pub w_s: f64,
    pub s0: f64,
}

impl Default for StateParams {
    fn default() -> Self {
        Self {
            k0: 2.0,
            w_s: 0.5,
            s0: 0.0,
        }
    }
}

impl StateParams {
    pub fn new(k0: f64, w_s: f64, s0: f64) -> Result<Self> {
        if !(k0.is_finite() && k0.abs() <= 4.0) {
            return Err(Error::param("k0", format!("|k0| must be at most 4, got {k0}")));
        }
        if !((0.2..=1.0).contains(&w_s)) {
            return Err(Error::param("w_s", format!("must lie in [0.2, 1], got {w_s}")));
        }
        if !s0.is_finite() {
            return Err(Error::param("s0", "must be finite"));
        }
        Ok(Self { k0, w_s, s0 })
    }

    /// Σ_m e^{ik₀(s−s₀+mL)} exp(−(s−s₀+mL)²/(4w²)).
    pub fn tangential_factor(&self, s: f64, length: f64) -> Complex64 {
        let images = (10.0 * self.w_s / length).ceil() as i64 + 1;
        (-images..=images)
            .map(|m| {
                let u = s - self.s0 + m as f64 * length;
                Complex64::from_polar((-u * u / (4.0 * self.w_s * self.w_s)).exp(), self.k0 * u)
            })
            .sum()
    }
}

/// Standard state on precomputed tube coordinates of a Cartesian grid.
///
/// The transverse factor is `exp(−λ²ωn²/2)`; the product is switched off
/// smoothly between `d = δ/2` and `d = δ`.
pub fn standard_state_on_frame(
    grid: &Arc<Grid2D>,
    frame: &CurveFrame,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
    params: &StateParams,
    tube: &TubeParams,
) -> Result<WaveFunction> {
    let delta = tube.delta;
    let scale = lambda * lambda * profile.omega;
    let values = (0..grid.len())
        .map(|k| {
            let d = frame.distance[k];
            if d >= delta {
                return Complex64::new(0.0, 0.0);
            }
            let n = frame.normal[k];
            let cut = smooth_below(d, delta, 0.5 * delta);
            params.tangential_factor(frame.s_star[k], curve.length()) * ((-0.5 * scale * n * n).exp() * cut)
        })
        .collect();
    WaveFunction::new(grid.clone(), values)?.normalize()
}

/// Normalized product state for the requested space.
pub fn make_standard_state(
    grid: &Arc<Grid2D>,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
    space: StateSpace,
    params: &StateParams,
    tube: &TubeParams,
) -> Result<WaveFunction> {
    let params = StateParams::new(params.k0, params.w_s, params.s0)?;
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be >= 1, got {lambda}")));
    }
    match space {
        StateSpace::Fullspace | StateSpace::TubeDirichlet => {
            if grid.kind != GridKind::Cartesian {
                return Err(Error::InvalidGrid("full-space states need a Cartesian grid".into()));
            }
            tube.check_against(curve)?;
            let limit = fullspace_resolution_limit(lambda, profile.omega);
            grid.axis1.check_spacing(limit)?;
            grid.axis2.check_spacing(limit)?;
            let frame = CurveFrame::compute(grid, curve);
            standard_state_on_frame(grid, &frame, curve, profile, lambda, &params, tube)
        }
        StateSpace::NormalBundle => {
            check_normal_bundle_grid(grid, curve, profile)?;
            let (ss, ys) = (grid.axis1.coords(), grid.axis2.coords());
            let tangential: Vec<Complex64> = ss
                .iter()
                .map(|&s| params.tangential_factor(s, curve.length()))
                .collect();
            let transverse: Vec<f64> = ys.iter().map(|y| (-0.5 * profile.omega * y * y).exp()).collect();
            let values = (0..grid.len())
                .map(|k| {
                    let (i, j) = grid.split(k);
                    tangential[i] * transverse[j]
                })
                .collect();
            WaveFunction::new(grid.clone(), values)?.normalize()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_curve, CurveKind};
    use crate::operators::{build_effective_hamiltonian_with, build_fullspace_hamiltonian, CurvatureTerms};

    fn circle() -> Curve {
        make_curve(CurveKind::Circle, &[1.0], 1024).unwrap()
    }

    fn tube() -> TubeParams {
        TubeParams::new(0.5, 0.3, 0.5).unwrap()
    }

    #[test]
    fn parameter_ranges() {
        assert!(StateParams::new(2.0, 0.5, 0.0).is_ok());
        assert!(StateParams::new(5.0, 0.5, 0.0).is_err());
        assert!(StateParams::new(2.0, 0.1, 0.0).is_err());
        assert!(StateParams::new(2.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn states_are_normalized() {
        let c = circle();
        let p = ConfinementProfile::default();
        let nb = Arc::new(Grid2D::normal_bundle(c.length(), 64, 8.0, 127).unwrap());
        let psi = make_standard_state(&nb, &c, &p, 4.0, StateSpace::NormalBundle, &StateParams::default(), &tube())
            .unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-10);
        assert!(psi.is_normalized());
        let bx = Arc::new(Grid2D::cartesian_box(1.6, 80).unwrap());
        let psi =
            make_standard_state(&bx, &c, &p, 4.0, StateSpace::Fullspace, &StateParams::default(), &tube()).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_unresolved_grids() {
        let c = circle();
        let p = ConfinementProfile::default();
        let bx = Arc::new(Grid2D::cartesian_box(1.6, 40).unwrap());
        let err = make_standard_state(&bx, &c, &p, 4.0, StateSpace::Fullspace, &StateParams::default(), &tube());
        assert!(matches!(err, Err(Error::UnderResolved { .. })));
        let nb = Arc::new(Grid2D::normal_bundle(c.length(), 64, 8.0, 60).unwrap());
        let err = make_standard_state(&nb, &c, &p, 4.0, StateSpace::NormalBundle, &StateParams::default(), &tube());
        assert!(matches!(err, Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn effective_energy_matches_gaussian_moments() {
        // V ≡ 0, no curvature terms: ⟨L₀⟩ = λ²ω/2 + k₀²/2 + 1/(8w²)
        let c = circle();
        let p = ConfinementProfile::new(1.0, 0.0).unwrap();
        let nb = Arc::new(Grid2D::normal_bundle(c.length(), 128, 8.0, 127).unwrap());
        let sp = StateParams::default();
        let lambda = 4.0;
        let psi = make_standard_state(&nb, &c, &p, lambda, StateSpace::NormalBundle, &sp, &tube()).unwrap();
        let l0 = build_effective_hamiltonian_with(&nb, &c, &p, lambda, CurvatureTerms::Omitted).unwrap();
        let got = l0.expectation(psi.values());
        let expect = lambda * lambda / 2.0 + sp.k0 * sp.k0 / 2.0 + 1.0 / (8.0 * sp.w_s * sp.w_s);
        assert!((got - expect).abs() / expect < 0.01, "{got} vs {expect}");
    }

    #[test]
    fn fullspace_energy_hypothesis() {
        let c = circle();
        let p = ConfinementProfile::default();
        let lambda = 4.0;
        let bx = Arc::new(Grid2D::cartesian_box(1.6, 80).unwrap());
        let h = build_fullspace_hamiltonian(&bx, &c, &p, lambda).unwrap();
        let ratio = |delta: f64| {
            let t = TubeParams::new(delta, 0.3, 0.5).unwrap();
            let psi =
                make_standard_state(&bx, &c, &p, lambda, StateSpace::Fullspace, &StateParams::default(), &t).unwrap();
            h.apply_norm(psi.values()) / (lambda * lambda)
        };
        // a wide tube leaves the Gaussian intact
        let wide = ratio(0.9);
        assert!(wide <= 1.0, "‖Hψ‖/λ² = {wide}");
        // at δ = 0.5 the cut at d ∈ [δ/2, δ] crosses the Gaussian core
        assert!(ratio(0.5) > wide);
    }
}
