//! Independent references: oscillator spectra by Sturm bisection, dense
//! matrix exponentials, closed-form Gaussian moments and quadrature.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{make_curve, CurveKind};
use crate::operators::{build_fullspace_hamiltonian, ConfinementProfile, Grid2D, OperatorMatrix};
use crate::propagation::{CrankNicolson, WaveFunction};

/// Largest dimension accepted by [`dense_expm_evolve`].
pub const DENSE_LIMIT: usize = 2500;

/// Whether an oracle compares absolute or relative error with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceMode {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub mode: ToleranceMode,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(name: &str, measured: f64, reference: f64, tolerance: f64, mode: ToleranceMode) -> Self {
        let abs_err = (measured - reference).abs();
        let rel_err = if reference != 0.0 {
            abs_err / reference.abs()
        } else {
            abs_err
        };
        let err = match mode {
            ToleranceMode::Absolute => abs_err,
            ToleranceMode::Relative => rel_err,
        };
        Self {
            name: name.to_string(),
            measured,
            reference,
            abs_err,
            rel_err,
            tolerance,
            mode,
            pass: err <= tolerance,
        }
    }

    /// Report for a quantity that must lie in `[lo, hi]`; `reference` is the midpoint.
    pub fn within(name: &str, measured: f64, lo: f64, hi: f64) -> Self {
        let reference = 0.5 * (lo + hi);
        let mut r = Self::new(name, measured, reference, 0.5 * (hi - lo), ToleranceMode::Absolute);
        r.pass = (lo..=hi).contains(&measured);
        r
    }
}

/// Ground energy ω/2 of ½(−∂² + ω²y²).
pub fn ho_ground_energy(omega: f64) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::param("omega", "must be positive"));
    }
    Ok(0.5 * omega)
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix
/// (Sturm sequence count).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let prev = if q == 0.0 { f64::EPSILON * (off[i - 1].abs() + 1.0) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest eigenvalue of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_lowest(diag: &[f64], off: &[f64]) -> Result<f64> {
    if diag.is_empty() || off.len() + 1 != diag.len() {
        return Err(Error::param("tridiagonal", "need n diagonal and n−1 off-diagonal entries"));
    }
    // Gershgorin interval
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..diag.len() {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + off.get(i).map_or(0.0, |v| v.abs());
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Ground energy of ½(−∂² + ω²y²) on `count` interior points of
/// `[−y_max, y_max]` with Dirichlet ends.
pub fn grid_oscillator_ground_energy(omega: f64, y_max: f64, count: usize) -> Result<f64> {
    if count < 3 || !(y_max > 0.0) {
        return Err(Error::param("count", "need at least 3 points and y_max > 0"));
    }
    let h = 2.0 * y_max / (count + 1) as f64;
    let diag: Vec<f64> = (0..count)
        .map(|i| {
            let y = -y_max + (i + 1) as f64 * h;
            1.0 / (h * h) + 0.5 * omega * omega * y * y
        })
        .collect();
    let off = vec![-0.5 / (h * h); count - 1];
    tridiagonal_lowest(&diag, &off)
}

/// `e^{−itH}ψ₀` from a dense eigendecomposition of H.
///
/// Weighted grids are handled through the symmetric form `W^{1/2} H W^{−1/2}`.
pub fn dense_expm_evolve(h: &OperatorMatrix, psi0: &WaveFunction, t: f64) -> Result<WaveFunction> {
    let n = h.dim();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dimension: n,
            limit: DENSE_LIMIT,
        });
    }
    if !h.same_grid(psi0.grid()) {
        return Err(Error::GridMismatch);
    }
    let sw: Vec<f64> = h.grid().weight().iter().map(|w| w.sqrt()).collect();
    let mut m = h.csr().to_dense();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= sw[i] / sw[j];
        }
    }
    let sym = 0.5 * (&m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let v: DMatrix<Complex64> = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let x = DVector::from_iterator(n, psi0.values().iter().zip(&sw).map(|(a, s)| a * s));
    let mut c = v.adjoint() * x;
    for (ci, &e) in c.iter_mut().zip(eig.eigenvalues.iter()) {
        *ci *= Complex64::from_polar(1.0, -e * t);
    }
    let y = v * c;
    let values = y.iter().zip(&sw).map(|(a, s)| a / s).collect();
    let mut out = WaveFunction::new(psi0.grid().clone(), values)?;
    if psi0.is_normalized() {
        out = out.normalize()?;
    }
    Ok(out)
}

/// Closed-form Gaussian integrals for `|ψ|²` with standard deviation `width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianMoment {
    /// ⟨x²⟩.
    X2,
    /// ⟨p²⟩ for `ψ ∝ e^{ik₀x} exp(−x²/(4·width²))`.
    P2,
    /// Probability of `|x| > a`.
    TailBeyond(f64),
}

pub fn gaussian_moment(kind: GaussianMoment, width: f64, k0: f64) -> Result<f64> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::param("width", "must be positive"));
    }
    Ok(match kind {
        GaussianMoment::X2 => width * width,
        GaussianMoment::P2 => k0 * k0 + 1.0 / (4.0 * width * width),
        GaussianMoment::TailBeyond(a) => erfc(a.abs() / (width * std::f64::consts::SQRT_2)),
    })
}

/// Complementary error function: Maclaurin series below 2, continued
/// fraction above.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return 1.0 - 2.0 / PI.sqrt() * sum;
    }
    // erfc x = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
    let mut f = x;
    for k in (1..=80).rev() {
        f = x + (k as f64 / 2.0) / f;
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Quadrature versions of the Gaussian moments, used to cross-check the
/// closed forms.
pub fn gaussian_moment_quadrature(kind: GaussianMoment, width: f64, k0: f64) -> f64 {
    let pdf = |x: f64| (-x * x / (2.0 * width * width)).exp() / (width * (2.0 * PI).sqrt());
    let span = 14.0 * width;
    match kind {
        GaussianMoment::X2 => simpson(|x| x * x * pdf(x), -span, span, 20_000),
        // |ψ'|² = |ik₀ψ − xψ/(2w²)|² = (k₀² + x²/(4w⁴))|ψ|²
        GaussianMoment::P2 => simpson(
            |x| (k0 * k0 + x * x / (4.0 * width.powi(4))) * pdf(x),
            -span,
            span,
            20_000,
        ),
        GaussianMoment::TailBeyond(a) => {
            let a = a.abs();
            2.0 * simpson(pdf, a, a + span, 20_000)
        }
    }
}

/// The 24×24 propagation problem shared by the oracle gate.
pub struct SmallProblem {
    pub hamiltonian: OperatorMatrix,
    pub initial: WaveFunction,
}

/// Full-space Hamiltonian at λ = 1 on a 24×24 box around the unit circle,
/// with a Gaussian packet of width 0.4 centred on the curve at (1, 0) and
/// moving along it.
pub fn small_problem() -> Result<SmallProblem> {
    let curve = make_curve(CurveKind::Circle, &[1.0], 512)?;
    let grid = Arc::new(Grid2D::cartesian_box(2.0, 24)?);
    let hamiltonian = build_fullspace_hamiltonian(&grid, &curve, &ConfinementProfile::default(), 1.0)?;
    let sigma = 0.4;
    let values = (0..grid.len())
        .map(|k| {
            let [x, y] = grid.point(k);
            let r2 = (x - 1.0).powi(2) + y * y;
            Complex64::from_polar((-r2 / (4.0 * sigma * sigma)).exp(), y)
        })
        .collect();
    let initial = WaveFunction::new(grid, values)?.normalize()?;
    Ok(SmallProblem { hamiltonian, initial })
}

/// `steps` Crank–Nicolson steps of size `dt` (negative runs backwards).
pub fn crank_nicolson_evolve(h: &OperatorMatrix, psi0: &WaveFunction, dt: f64, steps: usize) -> Result<WaveFunction> {
    let mut psi = psi0.clone();
    let mut cn = CrankNicolson::new(h, dt, 1e-13, 10_000)?;
    for _ in 0..steps {
        cn.step(&mut psi)?;
    }
    Ok(psi)
}

/// Ratio of the Crank–Nicolson errors at dt = 2e-3 and dt = 1e-3 against the
/// dense exponential on the small problem at T = 0.5. Second order gives 4.
pub fn dt_halving_ratio() -> Result<f64> {
    let SmallProblem { hamiltonian: h, initial: psi0 } = small_problem()?;
    let exact = dense_expm_evolve(&h, &psi0, 0.5)?;
    let coarse = crank_nicolson_evolve(&h, &psi0, 2e-3, 250)?.distance(&exact)?;
    let fine = crank_nicolson_evolve(&h, &psi0, 1e-3, 500)?.distance(&exact)?;
    Ok(coarse / fine)
}

/// Runs every oracle check of the validation gate.
pub fn validation_suite() -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();

    for omega in [1.0, 2.0] {
        out.push(OracleReport::new(
            &format!("ho_ground_energy(omega={omega})"),
            ho_ground_energy(omega)?,
            0.5 * omega,
            0.0,
            ToleranceMode::Absolute,
        ));
    }
    out.push(OracleReport::new(
        "grid_oscillator_ground[-8,8]x256",
        grid_oscillator_ground_energy(1.0, 8.0, 256)?,
        ho_ground_energy(1.0)?,
        1e-3,
        ToleranceMode::Absolute,
    ));

    let half = std::f64::consts::FRAC_1_SQRT_2;
    for (name, kind, width, k0) in [
        ("gaussian_x2(w=1/sqrt2)", GaussianMoment::X2, half, 0.0),
        ("gaussian_p2(w=0.5,k0=0)", GaussianMoment::P2, 0.5, 0.0),
        ("gaussian_p2(w=0.5,k0=2)", GaussianMoment::P2, 0.5, 2.0),
        ("gaussian_tail(a=4,w=1/sqrt2)", GaussianMoment::TailBeyond(4.0), half, 0.0),
        ("gaussian_tail(a=1,w=1)", GaussianMoment::TailBeyond(1.0), 1.0, 0.0),
    ] {
        out.push(OracleReport::new(
            name,
            gaussian_moment(kind, width, k0)?,
            gaussian_moment_quadrature(kind, width, k0),
            1e-6,
            ToleranceMode::Relative,
        ));
    }
    let tail4 = gaussian_moment(GaussianMoment::TailBeyond(4.0), half, 0.0)?;
    let mut r = OracleReport::new("gaussian_tail(a=4) below 1e-4", tail4, 0.0, 1e-4, ToleranceMode::Absolute);
    r.pass = tail4 < 1e-4;
    out.push(r);

    let SmallProblem { hamiltonian: h, initial: psi0 } = small_problem()?;
    let t_final = 0.5;
    let exact = dense_expm_evolve(&h, &psi0, t_final)?;

    let mid = dense_expm_evolve(&h, &psi0, 0.5 * t_final)?;
    let twice = dense_expm_evolve(&h, &mid, 0.5 * t_final)?;
    out.push(OracleReport::new(
        "expm_semigroup",
        twice.distance(&exact)?,
        0.0,
        1e-10,
        ToleranceMode::Absolute,
    ));

    let cn = crank_nicolson_evolve(&h, &psi0, 1e-3, 500)?;
    out.push(OracleReport::new(
        "cn_vs_expm_24x24(dt=1e-3,T=0.5)",
        cn.distance(&exact)?,
        0.0,
        1e-3,
        ToleranceMode::Absolute,
    ));
    out.push(OracleReport::new(
        "cn_norm_drift",
        cn.norm(),
        psi0.norm(),
        1e-6,
        ToleranceMode::Absolute,
    ));
    let e0 = h.expectation(psi0.values());
    out.push(OracleReport::new(
        "cn_energy_drift",
        h.expectation(cn.values()),
        e0,
        1e-6,
        ToleranceMode::Relative,
    ));
    let back = crank_nicolson_evolve(&h, &cn, -1e-3, 500)?;
    out.push(OracleReport::new(
        "cn_time_reversal",
        back.distance(&psi0)?,
        0.0,
        1e-6,
        ToleranceMode::Absolute,
    ));

    let coarse = crank_nicolson_evolve(&h, &psi0, 2e-3, 250)?.distance(&exact)?;
    let fine = cn.distance(&exact)?;
    out.push(OracleReport::within("cn_dt_halving_ratio", coarse / fine, 3.0, 5.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_reference_values() {
        // tabulated values
        for (x, v) in [
            (0.0, 1.0),
            (0.5, 0.479_500_122_186_953_5),
            (1.0, 0.157_299_207_050_285_13),
            (2.0, 4.677_734_981_047_266e-3),
            (3.0, 2.209_049_699_858_544e-5),
            (4.0, 1.541_725_790_028_002e-8),
            (-1.0, 1.842_700_792_949_715),
        ] {
            assert!((erfc(x) - v).abs() <= 1e-14 * v.max(1e-300) + 1e-16, "erfc({x})");
        }
        // continuity across the branch switch
        assert!((erfc(2.0 - 1e-12) - erfc(2.0)).abs() < 1e-13);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for kind in [GaussianMoment::X2, GaussianMoment::P2, GaussianMoment::TailBeyond(0.7)] {
            let a = gaussian_moment(kind, 0.8, 1.5).unwrap();
            let b = gaussian_moment_quadrature(kind, 0.8, 1.5);
            assert!((a - b).abs() <= 1e-9 * a.abs(), "{kind:?}: {a} vs {b}");
        }
        assert_eq!(gaussian_moment(GaussianMoment::P2, 0.5, 0.0).unwrap(), 1.0);
        assert!((gaussian_moment(GaussianMoment::X2, std::f64::consts::FRAC_1_SQRT_2, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(gaussian_moment(GaussianMoment::X2, 0.0, 0.0).is_err());
    }

    #[test]
    fn bisection_matches_dense_eigensolver() {
        let n = 60;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.3).sin()).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.4 + 0.1 * (i as f64).cos()).collect();
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        });
        let dense = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((tridiagonal_lowest(&diag, &off).unwrap() - dense).abs() < 1e-12);
    }

    #[test]
    fn oscillator_ground_energy() {
        assert_eq!(ho_ground_energy(1.0).unwrap(), 0.5);
        assert_eq!(ho_ground_energy(2.0).unwrap(), 1.0);
        assert!(ho_ground_energy(0.0).is_err());
        let e = grid_oscillator_ground_energy(1.0, 8.0, 256).unwrap();
        assert!((e - 0.5).abs() < 1e-3, "{e}");
    }

    #[test]
    fn dense_exponential_examples() {
        let g = Arc::new(Grid2D::cartesian_box(1.0, 16).unwrap());
        let d: Vec<f64> = (0..g.len()).map(|k| 0.1 * k as f64).collect();
        let h = OperatorMatrix::diagonal_from(g.clone(), &d).unwrap();
        let v: Vec<Complex64> = (0..g.len()).map(|k| Complex64::new(1.0, 0.01 * k as f64)).collect();
        let psi = WaveFunction::new(g.clone(), v).unwrap().normalize().unwrap();
        let same = dense_expm_evolve(&h, &psi, 0.0).unwrap();
        assert!(same.distance(&psi).unwrap() < 1e-13);
        let t = 0.7;
        let out = dense_expm_evolve(&h, &psi, t).unwrap();
        for k in 0..g.len() {
            let expect = psi.values()[k] * Complex64::from_polar(1.0, -d[k] * t);
            assert!((out.values()[k] - expect).norm() < 1e-12);
        }
        let big = Arc::new(Grid2D::cartesian_box(1.0, 51).unwrap());
        let hb = OperatorMatrix::diagonal_from(big.clone(), &vec![0.0; big.len()]).unwrap();
        assert!(matches!(
            dense_expm_evolve(&hb, &WaveFunction::zeros(big), 1.0),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn suite_passes() {
        let reports = validation_suite().unwrap();
        for r in &reports {
            assert!(r.pass, "{r:?}");
        }
    }
}
