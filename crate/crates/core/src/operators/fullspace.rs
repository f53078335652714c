//! H_λ = −½Δ + V + λ⁴W on a Cartesian box, and its Dirichlet restriction to the tube.

use std::sync::Arc;

use super::frame::CurveFrame;
use super::grid::{Boundary, Grid2D, GridKind};
use super::matrix::{CsrAssembler, OperatorMatrix};
use super::{check_lambda, ConfinementProfile};
use crate::error::{Error, Result};
use crate::geometry::{Curve, TubeParams};

/// Largest admissible box spacing: one sixth of the transverse ground-state
/// width `(λ²ω)^{-1/2}`.
pub fn fullspace_resolution_limit(lambda: f64, omega: f64) -> f64 {
    (lambda * lambda * omega).powf(-0.5) / 6.0
}

fn check_box(grid: &Grid2D, lambda: f64, profile: &ConfinementProfile) -> Result<()> {
    check_lambda(lambda)?;
    if grid.kind != GridKind::Cartesian
        || grid.axis1.boundary != Boundary::Dirichlet
        || grid.axis2.boundary != Boundary::Dirichlet
    {
        return Err(Error::InvalidGrid(
            "full-space operators need a Cartesian box with Dirichlet walls".into(),
        ));
    }
    let limit = fullspace_resolution_limit(lambda, profile.omega);
    grid.axis1.check_spacing(limit)?;
    grid.axis2.check_spacing(limit)?;
    Ok(())
}

/// Diagonal V + λ⁴W on the box.
fn potential_diagonal(
    frame: &CurveFrame,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
) -> Vec<f64> {
    let l4 = lambda.powi(4);
    frame
        .distance
        .iter()
        .zip(&frame.s_star)
        .map(|(&d, &s)| profile.fullspace_potential(curve, d, s) + l4 * profile.confinement(d))
        .collect()
}

fn assemble(
    grid: &Arc<Grid2D>,
    potential: &[f64],
    active: Option<&[bool]>,
) -> Result<OperatorMatrix> {
    let (n1, n2) = (grid.axis1.count, grid.axis2.count);
    let (h1, h2) = (grid.axis1.spacing(), grid.axis2.spacing());
    let (c1, c2) = (0.5 / (h1 * h1), 0.5 / (h2 * h2));
    let inside = |k: usize| active.is_none_or(|m| m[k]);
    let mut asm = CsrAssembler::new(grid.len());
    let mut row = Vec::with_capacity(5);
    for i in 0..n1 {
        for j in 0..n2 {
            let k = grid.index(i, j);
            row.clear();
            if !inside(k) {
                row.push((k, 1.0));
                asm.push_row(&mut row);
                continue;
            }
            row.push((k, 2.0 * c1 + 2.0 * c2 + potential[k]));
            for (off, c, along1) in [(-1, c1, true), (1, c1, true), (-1, c2, false), (1, c2, false)] {
                let nb = if along1 {
                    grid.axis1.neighbour(i, off).map(|ii| grid.index(ii, j))
                } else {
                    grid.axis2.neighbour(j, off).map(|jj| grid.index(i, jj))
                };
                if let Some(m) = nb.filter(|&m| inside(m)) {
                    row.push((m, -c));
                }
            }
            asm.push_row(&mut row);
        }
    }
    OperatorMatrix::new(grid.clone(), asm.finish())
}

/// H_λ with precomputed tube coordinates.
pub fn fullspace_hamiltonian_on(
    grid: &Arc<Grid2D>,
    frame: &CurveFrame,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
) -> Result<OperatorMatrix> {
    check_box(grid, lambda, profile)?;
    let pot = potential_diagonal(frame, curve, profile, lambda);
    assemble(grid, &pot, None)
}

/// H_λ^δ with precomputed tube coordinates. Rows outside `d < δ` are identity
/// rows decoupled from the tube.
pub fn dirichlet_hamiltonian_on(
    grid: &Arc<Grid2D>,
    frame: &CurveFrame,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
    tube: &TubeParams,
) -> Result<OperatorMatrix> {
    check_box(grid, lambda, profile)?;
    tube.check_against(curve)?;
    let pot = potential_diagonal(frame, curve, profile, lambda);
    let mask = frame.tube_mask(tube.delta);
    assemble(grid, &pot, Some(&mask))
}

/// H_λ = −½Δ + V + λ⁴W with a 5-point Laplacian and Dirichlet box walls.
pub fn build_fullspace_hamiltonian(
    grid: &Arc<Grid2D>,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
) -> Result<OperatorMatrix> {
    check_box(grid, lambda, profile)?;
    let frame = CurveFrame::compute(grid, curve);
    fullspace_hamiltonian_on(grid, &frame, curve, profile, lambda)
}

/// H_λ with Dirichlet conditions on ∂U_δ.
pub fn build_dirichlet_hamiltonian(
    grid: &Arc<Grid2D>,
    curve: &Curve,
    profile: &ConfinementProfile,
    lambda: f64,
    tube: &TubeParams,
) -> Result<OperatorMatrix> {
    check_box(grid, lambda, profile)?;
    tube.check_against(curve)?;
    let frame = CurveFrame::compute(grid, curve);
    dirichlet_hamiltonian_on(grid, &frame, curve, profile, lambda, tube)
}
