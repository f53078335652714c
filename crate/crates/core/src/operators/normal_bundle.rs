//! Operators on the normal bundle in coordinates `(s, y)`, `y = λn`.
//!
//! In tube coordinates the metric is `a² ds² + dn²` with `a = 1 − κ(s)n` and
//! volume `a ds dn`. Conjugating `−½Δ` with `a^{1/2}` gives, in the flat
//! measure `ds dn`,
//!
//! ```text
//! −½ ∂_s a⁻² ∂_s − ½ ∂_n² + V_geom,
//! V_geom = −κ²/(8a²) − n κ''/(4a³) − 5 n² κ'²/(8a⁴).
//! ```
//!
//! The first term of V_geom comes from the normal derivative of `a`, the
//! other two from its tangential derivatives. Rescaling `n = y/λ` turns
//! `−½∂_n² + λ⁴·½ω²n²` into `λ²·½(−∂_y² + ω²y²)`. The metric factor is
//! clamped at `a_min` away from the curve; the same clamped value enters V_geom.

use std::sync::Arc;

use super::cutoff::smooth_below;
use super::grid::{Axis, Boundary, Grid2D, GridKind};
use super::matrix::{Csr, CsrAssembler, OperatorMatrix};
use super::{check_lambda, ConfinementProfile};
use crate::error::{Error, Result};
use crate::geometry::{Curve, TubeParams};

/// Whether curvature enters the normal-bundle operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurvatureTerms {
    #[default]
    Included,
    /// a ≡ 1 and no constraint potential: the flat-strip limit.
    Omitted,
}

/// Validates an `(s, y)` grid for the given curve and profile.
pub fn check_normal_bundle_grid(grid: &Grid2D, curve: &Curve, profile: &ConfinementProfile) -> Result<()> {
    if grid.kind != GridKind::NormalBundle
        || grid.axis1.boundary != Boundary::Periodic
        || grid.axis2.boundary != Boundary::Dirichlet
    {
        return Err(Error::InvalidGrid(
            "normal-bundle operators need s periodic (axis 1) and y Dirichlet (axis 2)".into(),
        ));
    }
    let span = grid.axis1.max - grid.axis1.min;
    if (span - curve.length()).abs() > 1e-9 * curve.length() {
        return Err(Error::InvalidGrid(format!(
            "s axis spans {span}, curve length is {}",
            curve.length()
        )));
    }
    if (grid.axis2.min + grid.axis2.max).abs() > 1e-12 {
        return Err(Error::InvalidGrid("y axis must be symmetric about 0".into()));
    }
    let width = profile.omega.powf(-0.5);
    if grid.axis2.max < 8.0 * width * (1.0 - 1e-12) {
        return Err(Error::InvalidGrid(format!(
            "y box half-width {} is below 8/sqrt(omega) = {}",
            grid.axis2.max,
            8.0 * width
        )));
    }
    grid.axis2.check_spacing(width / 8.0)
}

/// V_geom(s, n) for the clamped metric factor.
pub fn geometric_potential(curve: &Curve, s: f64, n: f64, a_min: f64) -> f64 {
    let k = curve.curvature(s);
    let k1 = curve.curvature_derivative(s);
    let k2 = curve.curvature_second_derivative(s);
    let a = (1.0 - k * n).max(a_min);
    -k * k / (8.0 * a * a) - n * k2 / (4.0 * a.powi(3)) - 5.0 * n * n * k1 * k1 / (8.0 * a.powi(4))
}

struct TangentialSamples {
    kappa: Vec<f64>,
    kappa_mid: Vec<f64>,
    potential: Vec<f64>,
}

fn sample_tangential(curve: &Curve, profile: &ConfinementProfile, s_axis: &Axis) -> TangentialSamples {
    let h = s_axis.spacing();
    let s: Vec<f64> = s_axis.coords();
    TangentialSamples {
        kappa: s.iter().map(|&s| curve.curvature(s)).collect(),
        kappa_mid: s.iter().map(|&s| curve.curvature(s + 0.5 * h)).collect(),
        potential: s.iter().map(|&s| profile.tangential_potential(curve, s)).collect(),
    }
}

/// L_λ: full normal-bundle Hamiltonian in the flat inner product.
pub fn build_normalbundle_hamiltonian(
    grid: &Arc<Grid2D>,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
    tube: &TubeParams,
) -> Result<OperatorMatrix> {
    build_normalbundle_hamiltonian_with(grid, curve, profile, lambda, tube, CurvatureTerms::Included)
}

pub fn build_normalbundle_hamiltonian_with(
    grid: &Arc<Grid2D>,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
    tube: &TubeParams,
    terms: CurvatureTerms,
) -> Result<OperatorMatrix> {
    check_lambda(lambda)?;
    check_normal_bundle_grid(grid, curve, profile)?;
    tube.check_against(curve)?;

    let (ns, ny) = (grid.axis1.count, grid.axis2.count);
    let (hs, hy) = (grid.axis1.spacing(), grid.axis2.spacing());
    let ys = grid.axis2.coords();
    let ss = grid.axis1.coords();
    let samples = sample_tangential(curve, profile, &grid.axis1);
    let l2 = lambda * lambda;
    let omega2 = profile.omega * profile.omega;
    let cy = 0.5 * l2 / (hy * hy);

    // a⁻² on the half-integer s points (i + ½, j)
    let inv_a2_mid = |i: usize, j: usize| -> f64 {
        match terms {
            CurvatureTerms::Omitted => 1.0,
            CurvatureTerms::Included => {
                let a = (1.0 - samples.kappa_mid[i] * ys[j] / lambda).max(tube.a_min);
                1.0 / (a * a)
            }
        }
    };

    let mut asm = CsrAssembler::new(grid.len());
    let mut row = Vec::with_capacity(5);
    for i in 0..ns {
        let ip = grid.axis1.neighbour(i, 1).expect("periodic");
        let im = grid.axis1.neighbour(i, -1).expect("periodic");
        for j in 0..ny {
            let k = grid.index(i, j);
            let c_plus = 0.5 * inv_a2_mid(i, j) / (hs * hs);
            let c_minus = 0.5 * inv_a2_mid(im, j) / (hs * hs);
            let y = ys[j];
            let v_geom = match terms {
                CurvatureTerms::Omitted => 0.0,
                CurvatureTerms::Included => geometric_potential(curve, ss[i], y / lambda, tube.a_min),
            };
            let diag = c_plus + c_minus + 2.0 * cy + samples.potential[i] + 0.5 * l2 * omega2 * y * y + v_geom;
            row.clear();
            row.push((k, diag));
            row.push((grid.index(ip, j), -c_plus));
            row.push((grid.index(im, j), -c_minus));
            if let Some(jj) = grid.axis2.neighbour(j, 1) {
                row.push((grid.index(i, jj), -cy));
            }
            if let Some(jj) = grid.axis2.neighbour(j, -1) {
                row.push((grid.index(i, jj), -cy));
            }
            asm.push_row(&mut row);
        }
    }
    OperatorMatrix::new(grid.clone(), asm.finish())
}

/// H_B = −½∂_s² + V(s) − κ(s)²/8 on the periodic s axis (3-point stencil).
pub fn tangential_operator_1d(
    curve: &Curve,
    profile: &ConfinementProfile,
    s_axis: &Axis,
    terms: CurvatureTerms,
) -> Csr {
    let h = s_axis.spacing();
    let c = 0.5 / (h * h);
    let samples = sample_tangential(curve, profile, s_axis);
    let mut asm = CsrAssembler::new(s_axis.count);
    let mut row = Vec::with_capacity(3);
    for i in 0..s_axis.count {
        let constraint = match terms {
            CurvatureTerms::Included => -samples.kappa[i].powi(2) / 8.0,
            CurvatureTerms::Omitted => 0.0,
        };
        row.clear();
        row.push((i, 2.0 * c + samples.potential[i] + constraint));
        row.push((s_axis.neighbour(i, 1).expect("periodic"), -c));
        row.push((s_axis.neighbour(i, -1).expect("periodic"), -c));
        asm.push_row(&mut row);
    }
    asm.finish()
}

/// H_O = ½(−∂_y² + ω²y²) on the Dirichlet y axis (3-point stencil).
pub fn oscillator_1d(y_axis: &Axis, omega: f64) -> Csr {
    let h = y_axis.spacing();
    let c = 0.5 / (h * h);
    let mut asm = CsrAssembler::new(y_axis.count);
    let mut row = Vec::with_capacity(3);
    for j in 0..y_axis.count {
        let y = y_axis.coord(j);
        row.clear();
        row.push((j, 2.0 * c + 0.5 * omega * omega * y * y));
        for off in [-1, 1] {
            if let Some(m) = y_axis.neighbour(j, off) {
                row.push((m, -c));
            }
        }
        asm.push_row(&mut row);
    }
    asm.finish()
}

/// L₀,λ = H_B ⊗ 1 + λ²·1 ⊗ H_O.
pub fn build_effective_hamiltonian(
    grid: &Arc<Grid2D>,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
) -> Result<OperatorMatrix> {
    build_effective_hamiltonian_with(grid, curve, profile, lambda, CurvatureTerms::Included)
}

pub fn build_effective_hamiltonian_with(
    grid: &Arc<Grid2D>,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
    terms: CurvatureTerms,
) -> Result<OperatorMatrix> {
    check_lambda(lambda)?;
    check_normal_bundle_grid(grid, curve, profile)?;
    let hb = tangential_operator_1d(curve, profile, &grid.axis1, terms);
    let ho = oscillator_1d(&grid.axis2, profile.omega);
    let l2 = lambda * lambda;
    let mut asm = CsrAssembler::new(grid.len());
    let mut row = Vec::with_capacity(5);
    for i in 0..grid.axis1.count {
        for j in 0..grid.axis2.count {
            row.clear();
            row.extend(hb.row(i).map(|(ii, v)| (grid.index(ii, j), v)));
            row.extend(ho.row(j).map(|(jj, v)| (grid.index(i, jj), l2 * v)));
            asm.push_row(&mut row);
        }
    }
    OperatorMatrix::new(grid.clone(), asm.finish())
}

/// Q̄ = F₂ D_s* D_s F₂ + 1, with F₂ a smooth cutoff equal to 1 for
/// |y|/λ ≤ ε/2 and 0 for |y|/λ ≥ ε.
pub fn build_tangential_observable(
    grid: &Arc<Grid2D>,
    curve: &Curve,
    tube: &TubeParams,
    lambda: f64,
) -> Result<OperatorMatrix> {
    check_lambda(lambda)?;
    if grid.kind != GridKind::NormalBundle || grid.axis1.boundary != Boundary::Periodic {
        return Err(Error::InvalidGrid("Q̄ needs a normal-bundle grid".into()));
    }
    let span = grid.axis1.max - grid.axis1.min;
    if (span - curve.length()).abs() > 1e-9 * curve.length() {
        return Err(Error::InvalidGrid("s axis does not match the curve length".into()));
    }
    let eps = tube.epsilon;
    let f2: Vec<f64> = grid
        .axis2
        .coords()
        .iter()
        .map(|y| smooth_below(y.abs() / lambda, eps, 0.5 * eps))
        .collect();
    let hs = grid.axis1.spacing();
    let c = 1.0 / (hs * hs);
    let mut asm = CsrAssembler::new(grid.len());
    let mut row = Vec::with_capacity(3);
    for i in 0..grid.axis1.count {
        let ip = grid.axis1.neighbour(i, 1).expect("periodic");
        let im = grid.axis1.neighbour(i, -1).expect("periodic");
        for (j, &f) in f2.iter().enumerate() {
            let k = grid.index(i, j);
            let ff = f * f;
            row.clear();
            row.push((k, 1.0 + 2.0 * c * ff));
            if ff != 0.0 {
                row.push((grid.index(ip, j), -c * ff));
                row.push((grid.index(im, j), -c * ff));
            }
            asm.push_row(&mut row);
        }
    }
    OperatorMatrix::new(grid.clone(), asm.finish())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use nalgebra::DMatrix;

    use super::*;
    use crate::geometry::{make_curve, CurveKind};
    use crate::operators::spectrum::lowest_eigenvalue;

    fn circle() -> Curve {
        make_curve(CurveKind::Circle, &[1.0], 1024).unwrap()
    }

    fn nb_grid(ns: usize, ny: usize) -> Arc<Grid2D> {
        Arc::new(Grid2D::normal_bundle(TAU, ns, 8.0, ny).unwrap())
    }

    fn dense_min(m: &Csr) -> f64 {
        let d: DMatrix<f64> = m.to_dense();
        d.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn grid_checks() {
        let c = circle();
        let p = ConfinementProfile::default();
        assert!(check_normal_bundle_grid(&nb_grid(32, 127), &c, &p).is_ok());
        assert!(check_normal_bundle_grid(&nb_grid(32, 100), &c, &p).is_err());
        let short = Grid2D::normal_bundle(TAU, 32, 6.0, 127).unwrap();
        assert!(check_normal_bundle_grid(&short, &c, &p).is_err());
        let wrong_len = Grid2D::normal_bundle(6.0, 32, 8.0, 127).unwrap();
        assert!(check_normal_bundle_grid(&wrong_len, &c, &p).is_err());
        let t = TubeParams::new(0.5, 0.25, 0.5).unwrap();
        assert!(build_normalbundle_hamiltonian(&nb_grid(32, 127), &c, &p, 0.5, &t).is_err());
    }

    #[test]
    fn flat_limit_is_separable_oscillator() {
        let c = circle();
        let p = ConfinementProfile::default();
        let t = TubeParams::new(0.5, 0.25, 0.5).unwrap();
        let g = nb_grid(32, 127);
        let l = build_normalbundle_hamiltonian_with(&g, &c, &p, 4.0, &t, CurvatureTerms::Omitted).unwrap();
        let l0 = build_effective_hamiltonian_with(&g, &c, &p, 4.0, CurvatureTerms::Omitted).unwrap();
        assert!(l.is_hermitian() && l0.is_hermitian());
        for k in 0..g.len() {
            let a: Vec<_> = l.csr().row(k).collect();
            let b: Vec<_> = l0.csr().row(k).collect();
            assert_eq!(a.len(), b.len());
            for ((ca, va), (cb, vb)) in a.iter().zip(&b) {
                assert_eq!(ca, cb);
                assert!((va - vb).abs() < 1e-9 * vb.abs().max(1.0));
            }
        }
    }

    #[test]
    fn constraint_potential_limit_on_circle() {
        let c = circle();
        for lambda in [1e3, 1e6] {
            let v = geometric_potential(&c, 0.7, 1.0 / lambda, 0.5);
            // −1/(8(1 − 1/λ)²) + 1/8 ≈ 1/(4λ)
            assert!((v + 0.125).abs() < 1.0 / lambda);
        }
        assert!((geometric_potential(&c, 0.0, 0.0, 0.5) + 0.125).abs() < 1e-15);
    }

    #[test]
    fn operators_are_hermitian_on_an_ellipse() {
        let e = make_curve(CurveKind::Ellipse, &[1.5, 1.0], 2048).unwrap();
        let p = ConfinementProfile::default();
        let t = TubeParams::new(0.5, 0.25, 0.5).unwrap();
        let g = Arc::new(Grid2D::normal_bundle(e.length(), 48, 8.0, 127).unwrap());
        let l = build_normalbundle_hamiltonian(&g, &e, &p, 4.0, &t).unwrap();
        let l0 = build_effective_hamiltonian(&g, &e, &p, 4.0).unwrap();
        let q = build_tangential_observable(&g, &e, &t, 4.0).unwrap();
        for op in [&l, &l0, &q] {
            assert!(op.is_hermitian(), "asymmetry {}", op.asymmetry());
            assert!(op.asymmetry() <= HERMITIAN);
        }
    }

    const HERMITIAN: f64 = super::super::HERMITIAN_TOL;

    #[test]
    fn effective_ground_energy_is_tensor_sum() {
        let c = circle();
        let p = ConfinementProfile::default();
        let g = nb_grid(48, 127);
        let lambda = 4.0;
        let l0 = build_effective_hamiltonian(&g, &c, &p, lambda).unwrap();
        let e_b = dense_min(&tangential_operator_1d(&c, &p, &g.axis1, CurvatureTerms::Included));
        let e_o = dense_min(&oscillator_1d(&g.axis2, p.omega));
        assert!((e_o - 0.5).abs() < 1e-3);
        let e0 = lowest_eigenvalue(l0.csr(), None, 1e-12, 2000).unwrap();
        assert!((e0 - (e_b + lambda * lambda * e_o)).abs() < 1e-7, "{e0} vs {}", e_b + 16.0 * e_o);
    }

    #[test]
    fn normal_bundle_ground_energy_on_circle() {
        // λ²ω/2 + e_B with e_B = −1/8 for V ≡ 0
        let c = circle();
        let p = ConfinementProfile::new(1.0, 0.0).unwrap();
        let t = TubeParams::new(0.5, 0.25, 0.5).unwrap();
        let g = nb_grid(32, 127);
        let lambda = 8.0;
        let l = build_normalbundle_hamiltonian(&g, &c, &p, lambda, &t).unwrap();
        let e0 = lowest_eigenvalue(l.csr(), None, 1e-10, 2000).unwrap();
        let target = 32.0 - 0.125;
        assert!((e0 - target).abs() / target < 0.02, "e0 = {e0}");
    }

    #[test]
    fn observable_is_at_least_identity() {
        let c = circle();
        let t = TubeParams::new(0.5, 0.25, 0.5).unwrap();
        let g = Arc::new(Grid2D::normal_bundle(TAU, 16, 8.0, 40).unwrap());
        let q = build_tangential_observable(&g, &c, &t, 4.0).unwrap();
        let shifted = {
            let mut d = q.csr().to_dense();
            for k in 0..g.len() {
                d[(k, k)] -= 1.0;
            }
            d
        };
        let min = shifted.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > -1e-10);
    }
}
