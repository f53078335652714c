//! Measured quantities: cutoff masses, overlaps, moments, q(t), tail masses
//! and log-log rate fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{Boundary, CurveFrame, GridKind, OperatorMatrix, Region};
use crate::propagation::WaveFunction;

/// Default magnitude below which measured norms are excluded from rate fits.
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub lambda: Option<f64>,
    pub grid: String,
    pub config_hash: String,
    pub warnings: Vec<String>,
}

/// Time series of named scalar diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    times: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    pub metadata: RunMetadata,
}

impl TrajectoryRecord {
    pub fn new(names: Vec<String>) -> Result<Self> {
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n == "t" || n.contains([',', '\n', '"']) {
                return Err(Error::param("series", format!("invalid series name `{n}`")));
            }
            if names[..i].contains(n) {
                return Err(Error::param("series", format!("duplicate series name `{n}`")));
            }
        }
        let columns = vec![Vec::new(); names.len()];
        Ok(Self {
            times: Vec::new(),
            names,
            columns,
            metadata: RunMetadata::default(),
        })
    }

    pub fn push(&mut self, t: f64, values: &[f64]) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::param(
                "series",
                format!("{} values for {} series", values.len(), self.names.len()),
            ));
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::param("t", format!("times must increase ({t} after {last})")));
            }
        }
        self.times.push(t);
        for (c, &v) in self.columns.iter_mut().zip(values) {
            c.push(v);
        }
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Row `k` in column order.
    pub fn row(&self, k: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[k]).collect()
    }

    /// Largest value of a series.
    pub fn sup(&self, name: &str) -> Option<f64> {
        self.series(name)
            .map(|s| s.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// `max_t |x(t) − x(0)|`, divided by `|x(0)|` when `relative`.
    pub fn drift(&self, name: &str, relative: bool) -> Option<f64> {
        let s = self.series(name)?;
        let x0 = *s.first()?;
        let d = s.iter().map(|x| (x - x0).abs()).fold(0.0, f64::max);
        Some(if relative { d / x0.abs() } else { d })
    }
}

/// `‖F_region ψ‖` with a sharp cutoff.
pub fn cutoff_mass(psi: &WaveFunction, region: Region, frame: Option<&CurveFrame>) -> Result<f64> {
    let profile = region.profile(psi.grid(), frame, false, 0.0)?;
    Ok(psi.grid().expectation_of(&profile, psi.values()).sqrt())
}

/// `⟨ψ_A, ψ_B⟩` in the common inner product.
pub fn evolution_overlap(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    a.inner(b)
}

/// `‖ψ_A − ψ_B‖` for unit vectors via `2 − 2 Re⟨ψ_A, ψ_B⟩`, clamped at 0.
pub fn overlap_distance(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    let ov = evolution_overlap(a, b)?;
    Ok((2.0 - 2.0 * ov.re).max(0.0).sqrt())
}

/// Individual moment diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    /// ⟨n²⟩ with n = y/λ.
    N2,
    /// ⟨y²⟩.
    Y2,
    /// ‖∂_yψ‖².
    DyNorm2,
    /// λ⁻²‖∂_sψ‖².
    DxNorm2Scaled,
    /// ‖∇ψ‖² on a Cartesian grid.
    GradNorm2,
    /// ⟨ψ, Wψ⟩ with W = ½ω²d².
    WExpectation,
}

impl Moment {
    pub fn name(self) -> &'static str {
        match self {
            Moment::N2 => "n2",
            Moment::Y2 => "y2",
            Moment::DyNorm2 => "dy_norm2",
            Moment::DxNorm2Scaled => "dx_norm2_scaled",
            Moment::GradNorm2 => "grad_norm2",
            Moment::WExpectation => "w_expectation",
        }
    }
}

/// Moments defined on the state's grid; the others are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n2: Option<f64>,
    pub y2: Option<f64>,
    pub dy_norm2: Option<f64>,
    pub dx_norm2_scaled: Option<f64>,
    pub grad_norm2: Option<f64>,
    pub w_expectation: Option<f64>,
}

impl Moments {
    pub fn get(&self, which: Moment) -> Result<f64> {
        let v = match which {
            Moment::N2 => self.n2,
            Moment::Y2 => self.y2,
            Moment::DyNorm2 => self.dy_norm2,
            Moment::DxNorm2Scaled => self.dx_norm2_scaled,
            Moment::GradNorm2 => self.grad_norm2,
            Moment::WExpectation => self.w_expectation,
        };
        v.ok_or(Error::UnsupportedDiagnostic(which.name()))
    }
}

/// `h₁h₂ Σ |ψ_{k+1} − ψ_k|²/h²` along one axis; Dirichlet axes include the
/// jumps to the zero boundary values, so the sum equals `⟨ψ, −∂²_h ψ⟩`.
fn difference_norm2(psi: &WaveFunction, along_first: bool) -> f64 {
    let g = psi.grid();
    let axis = if along_first { &g.axis1 } else { &g.axis2 };
    let h = axis.spacing();
    let v = psi.values();
    let w = g.weight();
    let mut total = 0.0;
    for k in 0..g.len() {
        let (i1, i2) = g.split(k);
        let i = if along_first { i1 } else { i2 };
        let next = axis.neighbour(i, 1).map(|ii| {
            if along_first {
                g.index(ii, i2)
            } else {
                g.index(i1, ii)
            }
        });
        let right = next.map_or(Complex64::new(0.0, 0.0), |m| v[m]);
        total += (right - v[k]).norm_sqr() * w[k];
        if axis.boundary == Boundary::Dirichlet && i == 0 {
            total += v[k].norm_sqr() * w[k];
        }
    }
    total * g.cell_area() / (h * h)
}

/// Moment diagnostics of `psi`.
///
/// Normal-bundle grids give `n2`, `y2`, `dy_norm2`, `dx_norm2_scaled`;
/// Cartesian grids give `grad_norm2` and, when tube coordinates are
/// supplied, `w_expectation`.
pub fn moment_diagnostics(
    psi: &WaveFunction,
    lambda: f64,
    frame: Option<&CurveFrame>,
    omega: f64,
) -> Result<Moments> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be positive"));
    }
    let g = psi.grid();
    let mut m = Moments::default();
    match g.kind {
        GridKind::NormalBundle => {
            let ys = g.axis2.coords();
            let y2f: Vec<f64> = (0..g.len()).map(|k| ys[g.split(k).1].powi(2)).collect();
            let y2 = g.expectation_of(&y2f, psi.values());
            m.y2 = Some(y2);
            m.n2 = Some(y2 / (lambda * lambda));
            m.dy_norm2 = Some(difference_norm2(psi, false));
            m.dx_norm2_scaled = Some(difference_norm2(psi, true) / (lambda * lambda));
        }
        GridKind::Cartesian => {
            m.grad_norm2 = Some(difference_norm2(psi, true) + difference_norm2(psi, false));
            if let Some(f) = frame {
                if f.distance.len() != g.len() {
                    return Err(Error::GridMismatch);
                }
                let wf: Vec<f64> = f.distance.iter().map(|d| 0.5 * omega * omega * d * d).collect();
                m.w_expectation = Some(g.expectation_of(&wf, psi.values()));
            }
        }
    }
    Ok(m)
}

/// Single moment; errors when it is undefined for the grid.
pub fn moment(psi: &WaveFunction, lambda: f64, which: Moment, frame: Option<&CurveFrame>, omega: f64) -> Result<f64> {
    moment_diagnostics(psi, lambda, frame, omega)?.get(which)
}

/// `⟨ψ, Q̄ψ⟩`.
pub fn q_value(psi: &WaveFunction, qbar: &OperatorMatrix) -> Result<f64> {
    if !qbar.same_grid(psi.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(qbar.expectation(psi.values()))
}

/// Probability mass of ψ in `|y| > λ^{1−s_exp}` (sharp cutoff).
pub fn tail_mass_f3(psi: &WaveFunction, lambda: f64, s_exp: f64) -> Result<f64> {
    if !(s_exp > 0.0 && s_exp < 1.0) {
        return Err(Error::param("s_exp", format!("must lie in (0, 1), got {s_exp}")));
    }
    let g = psi.grid();
    if g.kind != GridKind::NormalBundle {
        return Err(Error::UnsupportedDiagnostic("tail_mass_f3"));
    }
    let edge = lambda.powf(1.0 - s_exp);
    let ys = g.axis2.coords();
    let f: Vec<f64> = (0..g.len())
        .map(|k| if ys[g.split(k).1].abs() > edge { 1.0 } else { 0.0 })
        .collect();
    Ok(g.expectation_of(&f, psi.values()))
}

/// Least-squares line through `(ln λ, ln err)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(λ, err)` pairs that entered the fit.
    pub points: Vec<(f64, f64)>,
    /// λ values whose err fell below the noise floor.
    pub at_noise_floor: Vec<f64>,
}

/// Fits `ln err = slope·ln λ + intercept`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    for w in points.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Fit("lambda values must be strictly increasing".into()));
        }
    }
    if let Some(&(l, e)) = points.iter().find(|(l, e)| !(*e > 0.0 && e.is_finite() && *l > 0.0)) {
        return Err(Error::Fit(format!("non-positive value at lambda = {l}: {e}")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if syy <= 1e-300 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: points.to_vec(),
        at_noise_floor: Vec::new(),
    })
}

/// [`fit_rate`] after dropping points with `err < floor`.
pub fn fit_rate_above_floor(points: &[(f64, f64)], floor: f64) -> Result<RateFit> {
    let (kept, dropped): (Vec<_>, Vec<_>) = points.iter().partition(|p| p.1 >= floor);
    let mut fit = fit_rate(&kept)?;
    fit.at_noise_floor = dropped.iter().map(|p| p.0).collect();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::operators::Grid2D;

    fn nb_state(k0: f64, w: f64) -> WaveFunction {
        let g = Arc::new(Grid2D::normal_bundle(std::f64::consts::TAU, 256, 8.0, 255).unwrap());
        let values = (0..g.len())
            .map(|k| {
                let [s, y] = g.point(k);
                let u = s - std::f64::consts::PI;
                Complex64::from_polar((-u * u / (4.0 * w * w) - 0.5 * y * y).exp(), k0 * u)
            })
            .collect();
        WaveFunction::new(g, values).unwrap().normalize().unwrap()
    }

    #[test]
    fn record_bookkeeping() {
        let mut r = TrajectoryRecord::new(vec!["a".into(), "b".into()]).unwrap();
        r.push(0.0, &[1.0, 2.0]).unwrap();
        r.push(0.5, &[3.0, -1.0]).unwrap();
        assert!(r.push(0.5, &[0.0, 0.0]).is_err());
        assert!(r.push(1.0, &[0.0]).is_err());
        assert_eq!(r.sup("a"), Some(3.0));
        assert_eq!(r.drift("b", true), Some(1.5));
        assert_eq!(r.row(1), vec![3.0, -1.0]);
        assert!(TrajectoryRecord::new(vec!["a".into(), "a".into()]).is_err());
        assert!(TrajectoryRecord::new(vec!["x,y".into()]).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let lambda = 4.0;
        let psi = nb_state(2.0, 0.5);
        let m = moment_diagnostics(&psi, lambda, None, 1.0).unwrap();
        assert!((m.n2.unwrap() - 0.03125).abs() < 1e-4);
        assert!((m.dy_norm2.unwrap() - 0.5).abs() < 1e-3);
        assert!((m.dx_norm2_scaled.unwrap() - 5.0 / 16.0).abs() / (5.0 / 16.0) < 1e-2);
        assert!(m.grad_norm2.is_none());
        assert!(matches!(
            m.get(Moment::WExpectation),
            Err(Error::UnsupportedDiagnostic("w_expectation"))
        ));
    }

    #[test]
    fn tail_mass_examples() {
        let psi = nb_state(0.0, 0.5);
        // erfc(4) ≈ 1.54e-8
        let m = tail_mass_f3(&psi, 16.0, 0.5).unwrap();
        assert!(m < 1e-4 && m > 0.0);
        // edge λ^{1−s} → λ = 16 lies beyond the grid's y_max = 8
        assert_eq!(tail_mass_f3(&psi, 16.0, 1e-9).unwrap(), 0.0);
        assert!(tail_mass_f3(&psi, 4.0, 1.0).is_err());
        // support beyond the edge
        let g = psi.grid().clone();
        let v = (0..g.len())
            .map(|k| Complex64::new(if g.point(k)[1] > 5.0 { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let far = WaveFunction::new(g, v).unwrap().normalize().unwrap();
        assert!((tail_mass_f3(&far, 16.0, 0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_examples() {
        let psi = nb_state(2.0, 0.5);
        assert!((evolution_overlap(&psi, &psi).unwrap() - 1.0).norm() < 1e-12);
        assert_eq!(overlap_distance(&psi, &psi).unwrap(), 0.0);
        // odd transverse mode is orthogonal to the even one
        let g = psi.grid().clone();
        let odd: Vec<Complex64> = psi
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| v * g.point(k)[1])
            .collect();
        let odd = WaveFunction::new(g, odd).unwrap().normalize().unwrap();
        assert!(evolution_overlap(&psi, &odd).unwrap().norm() < 1e-10);
        let other = Arc::new(Grid2D::normal_bundle(1.0, 16, 8.0, 127).unwrap());
        assert!(matches!(
            evolution_overlap(&psi, &WaveFunction::zeros(other)),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn rate_fit_examples() {
        let f = fit_rate(&[(2.0, 0.2), (4.0, 0.1), (8.0, 0.05)]).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_rate(&[(2.0, 0.3), (4.0, 0.3), (8.0, 0.3)]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        let f = fit_rate(&[(2.0, 0.4), (4.0, 0.336), (8.0, 0.283)]).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-2);
        assert!(fit_rate(&[(2.0, 0.4), (4.0, 0.3)]).is_err());
        assert!(fit_rate(&[(2.0, 0.4), (4.0, 0.0), (8.0, 0.1)]).is_err());
        assert!(fit_rate(&[(4.0, 0.4), (2.0, 0.3), (8.0, 0.1)]).is_err());
        let f = fit_rate_above_floor(&[(2.0, 0.2), (4.0, 0.1), (8.0, 0.05), (16.0, 1e-14)], 1e-12).unwrap();
        assert_eq!(f.at_noise_floor, vec![16.0]);
        assert_eq!(f.points.len(), 3);
    }
}
