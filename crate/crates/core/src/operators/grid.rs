use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible point count per axis.
pub const MIN_AXIS_COUNT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Points `min + i·h`, `h = (max − min)/count`; index wraps.
    Periodic,
    /// Interior points `min + (i+1)·h`, `h = (max − min)/(count + 1)`; the
    /// wave function vanishes at `min` and `max`.
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub boundary: Boundary,
}

impl Axis {
    pub fn new(name: &str, min: f64, max: f64, count: usize, boundary: Boundary) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::InvalidGrid(format!(
                "axis `{name}` needs finite bounds with max > min, got [{min}, {max}]"
            )));
        }
        if count < MIN_AXIS_COUNT {
            return Err(Error::InvalidGrid(format!(
                "axis `{name}` has {count} points, fewer than {MIN_AXIS_COUNT}"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            min,
            max,
            count,
            boundary,
        })
    }

    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => (self.max - self.min) / self.count as f64,
            Boundary::Dirichlet => (self.max - self.min) / (self.count + 1) as f64,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.min + i as f64 * self.spacing(),
            Boundary::Dirichlet => self.min + (i + 1) as f64 * self.spacing(),
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.coord(i)).collect()
    }

    /// Smallest count whose spacing does not exceed `limit`.
    pub fn required_count(&self, limit: f64) -> usize {
        let cells = ((self.max - self.min) / limit).ceil() as usize;
        match self.boundary {
            Boundary::Periodic => cells,
            Boundary::Dirichlet => cells.saturating_sub(1),
        }
    }

    /// Neighbour index `i + offset`, or `None` when it falls on a Dirichlet wall.
    pub fn neighbour(&self, i: usize, offset: isize) -> Option<usize> {
        let j = i as isize + offset;
        let n = self.count as isize;
        match self.boundary {
            Boundary::Periodic => Some(j.rem_euclid(n) as usize),
            Boundary::Dirichlet => (0..n).contains(&j).then_some(j as usize),
        }
    }

    pub(crate) fn check_spacing(&self, limit: f64) -> Result<()> {
        let h = self.spacing();
        if h > limit * (1.0 + 1e-12) {
            return Err(Error::UnderResolved {
                axis: self.name.clone(),
                spacing: h,
                limit,
                required_count: self.required_count(limit),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// A box in ℝ² with Cartesian axes (x, y).
    Cartesian,
    /// Arclength `s` (axis 1, periodic) times scaled normal coordinate `y = λn` (axis 2).
    NormalBundle,
}

/// Tensor grid with a per-point inner-product weight.
///
/// Values are stored axis-1-major: `index(i1, i2) = i1·count2 + i2`. The
/// inner product is `⟨a, b⟩ = h₁h₂ Σ w_k conj(a_k) b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub kind: GridKind,
    pub axis1: Axis,
    pub axis2: Axis,
    weight: Vec<f64>,
}

impl Grid2D {
    pub fn new(kind: GridKind, axis1: Axis, axis2: Axis) -> Self {
        let n = axis1.count * axis2.count;
        Self {
            kind,
            axis1,
            axis2,
            weight: vec![1.0; n],
        }
    }

    /// Square Cartesian box `[-half, half]²` with Dirichlet walls.
    pub fn cartesian_box(half_width: f64, count: usize) -> Result<Self> {
        Ok(Self::new(
            GridKind::Cartesian,
            Axis::new("x", -half_width, half_width, count, Boundary::Dirichlet)?,
            Axis::new("y", -half_width, half_width, count, Boundary::Dirichlet)?,
        ))
    }

    /// `(s, y)` grid: `s ∈ [0, length)` periodic, `y ∈ [-y_max, y_max]` Dirichlet.
    pub fn normal_bundle(length: f64, count_s: usize, y_max: f64, count_y: usize) -> Result<Self> {
        Ok(Self::new(
            GridKind::NormalBundle,
            Axis::new("s", 0.0, length, count_s, Boundary::Periodic)?,
            Axis::new("y", -y_max, y_max, count_y, Boundary::Dirichlet)?,
        ))
    }

    pub fn with_weight(mut self, weight: Vec<f64>) -> Result<Self> {
        if weight.len() != self.len() {
            return Err(Error::InvalidGrid(format!(
                "weight has {} entries for {} points",
                weight.len(),
                self.len()
            )));
        }
        if weight.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidGrid("weights must be positive and finite".into()));
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.axis1.count * self.axis2.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.axis2.count + i2
    }

    #[inline]
    pub fn split(&self, k: usize) -> (usize, usize) {
        (k / self.axis2.count, k % self.axis2.count)
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        let (i1, i2) = self.split(k);
        [self.axis1.coord(i1), self.axis2.coord(i2)]
    }

    pub fn cell_area(&self) -> f64 {
        self.axis1.spacing() * self.axis2.spacing()
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn is_flat(&self) -> bool {
        self.weight.iter().all(|&w| w == 1.0)
    }

    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        let sum: Complex64 = a
            .iter()
            .zip(b)
            .zip(&self.weight)
            .map(|((x, y), w)| x.conj() * y * *w)
            .sum();
        sum * self.cell_area()
    }

    pub fn norm_sqr(&self, a: &[Complex64]) -> f64 {
        a.iter()
            .zip(&self.weight)
            .map(|(x, w)| x.norm_sqr() * w)
            .sum::<f64>()
            * self.cell_area()
    }

    /// `h₁h₂ Σ w_k f_k |a_k|²` for a real per-point function `f`.
    pub fn expectation_of(&self, f: &[f64], a: &[Complex64]) -> f64 {
        a.iter()
            .zip(&self.weight)
            .zip(f)
            .map(|((x, w), f)| x.norm_sqr() * w * f)
            .sum::<f64>()
            * self.cell_area()
    }

    /// Compact description used in run metadata.
    pub fn describe(&self) -> String {
        let ax = |a: &Axis| {
            format!(
                "{}:[{},{}]x{}:{}",
                a.name,
                a.min,
                a.max,
                a.count,
                match a.boundary {
                    Boundary::Periodic => "periodic",
                    Boundary::Dirichlet => "dirichlet",
                }
            )
        };
        format!("{:?} {} {}", self.kind, ax(&self.axis1), ax(&self.axis2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_conventions() {
        let a = Axis::new("x", -1.0, 1.0, 19, Boundary::Dirichlet).unwrap();
        assert!((a.spacing() - 0.1).abs() < 1e-15);
        assert!((a.coord(0) + 0.9).abs() < 1e-15);
        assert!((a.coord(18) - 0.9).abs() < 1e-14);
        assert_eq!(a.neighbour(0, -1), None);
        assert_eq!(a.neighbour(18, 1), None);

        let p = Axis::new("s", 0.0, 2.0, 20, Boundary::Periodic).unwrap();
        assert!((p.spacing() - 0.1).abs() < 1e-15);
        assert_eq!(p.neighbour(0, -1), Some(19));
        assert_eq!(p.neighbour(19, 1), Some(0));
    }

    #[test]
    fn rejects_small_or_degenerate_axes() {
        assert!(Axis::new("x", 0.0, 1.0, 15, Boundary::Dirichlet).is_err());
        assert!(Axis::new("x", 1.0, 1.0, 32, Boundary::Dirichlet).is_err());
    }

    #[test]
    fn required_count_meets_limit() {
        let a = Axis::new("x", -2.5, 2.5, 16, Boundary::Dirichlet).unwrap();
        let need = a.required_count(1.0 / 48.0);
        let b = Axis { count: need, ..a.clone() };
        assert!(b.spacing() <= 1.0 / 48.0);
        let c = Axis { count: need - 1, ..a };
        assert!(c.spacing() > 1.0 / 48.0);
    }

    #[test]
    fn weights_must_be_positive() {
        let g = Grid2D::cartesian_box(1.0, 16).unwrap();
        assert!(g.is_flat());
        let n = g.len();
        assert!(g.clone().with_weight(vec![0.0; n]).is_err());
        assert!(g.with_weight(vec![2.0; n]).is_ok());
    }
}
