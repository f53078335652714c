use crate::geometry::{normal_coordinate, Curve};

use super::grid::{Grid2D, GridKind};

/// Tube coordinates of every point of a Cartesian grid relative to a curve.
#[derive(Debug, Clone)]
pub struct CurveFrame {
    /// d(x, S).
    pub distance: Vec<f64>,
    /// Arclength of the nearest point.
    pub s_star: Vec<f64>,
    /// Signed normal coordinate (positive towards the curve's normal).
    pub normal: Vec<f64>,
}

impl CurveFrame {
    pub fn compute(grid: &Grid2D, curve: &Curve) -> Self {
        debug_assert_eq!(grid.kind, GridKind::Cartesian);
        let n = grid.len();
        let mut distance = Vec::with_capacity(n);
        let mut s_star = Vec::with_capacity(n);
        let mut normal = Vec::with_capacity(n);
        for k in 0..n {
            let (d, s, nn) = normal_coordinate(curve, grid.point(k));
            distance.push(d);
            s_star.push(s);
            normal.push(nn);
        }
        Self {
            distance,
            s_star,
            normal,
        }
    }

    /// Points strictly inside the tube `d < delta`.
    pub fn tube_mask(&self, delta: f64) -> Vec<bool> {
        self.distance.iter().map(|&d| d < delta).collect()
    }
}
