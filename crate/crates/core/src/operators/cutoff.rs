//! Sharp and smooth cutoff multipliers F₍·₎.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::frame::CurveFrame;
use super::grid::{Grid2D, GridKind};
use super::matrix::OperatorMatrix;
use crate::error::{Error, Result};

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1, built from `exp(−1/t)`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let g = |x: f64| (-1.0 / x).exp();
    let (a, b) = (g(t), g(1.0 - t));
    a / (a + b)
}

/// Smooth indicator of `value < edge`: 1 below `edge − width`, 0 at and above `edge`.
pub fn smooth_below(value: f64, edge: f64, width: f64) -> f64 {
    1.0 - smooth_step((value - (edge - width)) / width)
}

/// Regions on which cutoffs act.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Everywhere,
    /// d(x, S) ≥ ε.
    DistanceAtLeast(f64),
    /// d(x, S) ≤ ε.
    DistanceAtMost(f64),
    /// d(x, S) < ε, the complement of `DistanceAtLeast`.
    DistanceBelow(f64),
    /// |y|/λ < ε.
    ScaledNormalBelow { lambda: f64, epsilon: f64 },
    /// |y| < λ^{1−s}.
    NormalCore { lambda: f64, s_exp: f64 },
    /// |y| ≥ λ^{1−s}, the complement of `NormalCore`.
    NormalTail { lambda: f64, s_exp: f64 },
}

impl Region {
    pub fn complement(self) -> Option<Region> {
        Some(match self {
            Region::DistanceAtLeast(e) => Region::DistanceBelow(e),
            Region::DistanceBelow(e) => Region::DistanceAtLeast(e),
            Region::NormalCore { lambda, s_exp } => Region::NormalTail { lambda, s_exp },
            Region::NormalTail { lambda, s_exp } => Region::NormalCore { lambda, s_exp },
            _ => return None,
        })
    }

    fn needs_frame(self) -> bool {
        matches!(
            self,
            Region::DistanceAtLeast(_) | Region::DistanceAtMost(_) | Region::DistanceBelow(_)
        )
    }

    fn needs_normal_bundle(self) -> bool {
        matches!(
            self,
            Region::ScaledNormalBelow { .. } | Region::NormalCore { .. } | Region::NormalTail { .. }
        )
    }

    /// Sharp indicator, or a smooth version whose transition band of the
    /// given width lies inside the region.
    fn value(self, coordinate: f64, smooth: bool, width: f64) -> f64 {
        let sharp = |inside: bool| if inside { 1.0 } else { 0.0 };
        match self {
            Region::Everywhere => 1.0,
            Region::DistanceAtLeast(e) => {
                if smooth {
                    smooth_step((coordinate - e) / width)
                } else {
                    sharp(coordinate >= e)
                }
            }
            Region::DistanceAtMost(e) | Region::DistanceBelow(e) => {
                if smooth {
                    smooth_below(coordinate, e, width)
                } else if matches!(self, Region::DistanceAtMost(_)) {
                    sharp(coordinate <= e)
                } else {
                    sharp(coordinate < e)
                }
            }
            Region::ScaledNormalBelow { lambda, epsilon } => {
                let v = coordinate.abs() / lambda;
                if smooth {
                    smooth_below(v, epsilon, width)
                } else {
                    sharp(v < epsilon)
                }
            }
            Region::NormalCore { lambda, s_exp } => {
                let edge = lambda.powf(1.0 - s_exp);
                if smooth {
                    smooth_below(coordinate.abs(), edge, width)
                } else {
                    sharp(coordinate.abs() < edge)
                }
            }
            Region::NormalTail { lambda, s_exp } => {
                let edge = lambda.powf(1.0 - s_exp);
                if smooth {
                    smooth_step((coordinate.abs() - edge) / width)
                } else {
                    sharp(coordinate.abs() >= edge)
                }
            }
        }
    }

    /// Cutoff profile on every grid point.
    pub fn profile(
        self,
        grid: &Grid2D,
        frame: Option<&CurveFrame>,
        smooth: bool,
        width: f64,
    ) -> Result<Vec<f64>> {
        if smooth && !(width > 0.0 && width.is_finite()) {
            return Err(Error::param("width", "smooth cutoffs need a positive width"));
        }
        if self.needs_frame() {
            let frame = match (grid.kind, frame) {
                (GridKind::Cartesian, Some(f)) => f,
                _ => return Err(Error::UnsupportedRegion(self.to_string())),
            };
            return Ok(frame
                .distance
                .iter()
                .map(|&d| self.value(d, smooth, width))
                .collect());
        }
        if self.needs_normal_bundle() {
            if grid.kind != GridKind::NormalBundle {
                return Err(Error::UnsupportedRegion(self.to_string()));
            }
            let ys = grid.axis2.coords();
            return Ok((0..grid.len())
                .map(|k| self.value(ys[grid.split(k).1], smooth, width))
                .collect());
        }
        Ok(vec![1.0; grid.len()])
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Everywhere => write!(f, "all"),
            Region::DistanceAtLeast(e) => write!(f, "dist_ge:{e}"),
            Region::DistanceAtMost(e) => write!(f, "dist_le:{e}"),
            Region::DistanceBelow(e) => write!(f, "dist_lt:{e}"),
            Region::ScaledNormalBelow { lambda, epsilon } => {
                write!(f, "scaled_normal_lt:{lambda}:{epsilon}")
            }
            Region::NormalCore { lambda, s_exp } => write!(f, "normal_core:{lambda}:{s_exp}"),
            Region::NormalTail { lambda, s_exp } => write!(f, "normal_tail:{lambda}:{s_exp}"),
        }
    }
}

impl FromStr for Region {
    type Err = Error;

    /// Parses the `Display` form, e.g. `dist_ge:0.3` or `normal_tail:16:0.5`.
    fn from_str(spec: &str) -> Result<Self> {
        let bad = || Error::UnsupportedRegion(spec.to_string());
        let mut parts = spec.split(':');
        let tag = parts.next().ok_or_else(bad)?;
        let nums: Vec<f64> = parts
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let region = match (tag, nums.as_slice()) {
            ("all", []) => Region::Everywhere,
            ("dist_ge", [e]) => Region::DistanceAtLeast(*e),
            ("dist_le", [e]) => Region::DistanceAtMost(*e),
            ("dist_lt", [e]) => Region::DistanceBelow(*e),
            ("scaled_normal_lt", [l, e]) => Region::ScaledNormalBelow {
                lambda: *l,
                epsilon: *e,
            },
            ("normal_core", [l, s]) => Region::NormalCore {
                lambda: *l,
                s_exp: *s,
            },
            ("normal_tail", [l, s]) => Region::NormalTail {
                lambda: *l,
                s_exp: *s,
            },
            _ => return Err(bad()),
        };
        Ok(region)
    }
}

/// Diagonal multiplier F_region, sharp (0/1) or smooth over `width`.
pub fn cutoff_multiplier(
    grid: &Arc<Grid2D>,
    frame: Option<&CurveFrame>,
    region: Region,
    smooth: bool,
    width: f64,
) -> Result<OperatorMatrix> {
    let diag = region.profile(grid, frame, smooth, width)?;
    OperatorMatrix::diagonal_from(grid.clone(), &diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_shape() {
        assert_eq!(smooth_step(-0.1), 0.0);
        assert_eq!(smooth_step(1.2), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 1..100 {
            let v = smooth_step(k as f64 / 100.0);
            assert!(v >= prev && (v > prev || v == 1.0));
            prev = v;
        }
    }

    #[test]
    fn region_spec_round_trip() {
        for r in [
            Region::Everywhere,
            Region::DistanceAtLeast(0.3),
            Region::ScaledNormalBelow {
                lambda: 4.0,
                epsilon: 0.25,
            },
            Region::NormalTail {
                lambda: 16.0,
                s_exp: 0.5,
            },
        ] {
            assert_eq!(r.to_string().parse::<Region>().unwrap(), r);
        }
        assert!("dist_between:0.1:0.2".parse::<Region>().is_err());
        assert!("dist_ge".parse::<Region>().is_err());
    }

    #[test]
    fn normal_bundle_region_rejected_on_box() {
        let g = Grid2D::cartesian_box(1.0, 16).unwrap();
        let r = Region::NormalCore {
            lambda: 4.0,
            s_exp: 0.5,
        };
        assert!(r.profile(&g, None, false, 0.0).is_err());
        assert!(Region::DistanceAtLeast(0.1).profile(&g, None, false, 0.0).is_err());
    }

    #[test]
    fn smooth_and_sharp_differ_only_on_band() {
        let g = Grid2D::normal_bundle(1.0, 16, 8.0, 127).unwrap();
        let r = Region::ScaledNormalBelow {
            lambda: 4.0,
            epsilon: 0.5,
        };
        let sharp = r.profile(&g, None, false, 0.0).unwrap();
        let smooth = r.profile(&g, None, true, 0.125).unwrap();
        let ys = g.axis2.coords();
        for k in 0..g.len() {
            let v = ys[g.split(k).1].abs() / 4.0;
            if sharp[k] != smooth[k] {
                assert!((0.375..0.5).contains(&v), "v = {v}");
            }
            assert!((0.0..=1.0).contains(&smooth[k]));
            assert!(smooth[k] <= sharp[k]);
        }
        assert!(smooth.iter().zip(&sharp).any(|(a, b)| a != b));
    }
}
