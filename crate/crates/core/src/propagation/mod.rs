//! Crank–Nicolson time evolution `ψ ↦ e^{−itH}ψ` and the standard initial states.

mod solver;
mod state;

use std::sync::Arc;

use num_complex::Complex64;

use crate::diagnostics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::operators::{Grid2D, OperatorMatrix};
use solver::ShiftedSolver;

pub use state::{make_standard_state, standard_state_on_frame, StateParams, StateSpace};

/// Largest tolerated change of ‖ψ_t‖ over a run.
pub const NORM_DRIFT_TOL: f64 = 1e-6;

/// Complex grid function tied to its grid and inner product.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    values: Vec<Complex64>,
    grid: Arc<Grid2D>,
    normalized: bool,
}

impl WaveFunction {
    pub fn new(grid: Arc<Grid2D>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::param("psi", "entries must be finite"));
        }
        Ok(Self {
            values,
            grid,
            normalized: false,
        })
    }

    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        let n = grid.len();
        Self {
            values: vec![Complex64::new(0.0, 0.0); n],
            grid,
            normalized: false,
        }
    }

    /// Scales to unit norm; fails on the zero function.
    pub fn normalize(mut self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::param("psi", "cannot normalize a zero or non-finite state"));
        }
        self.values.iter_mut().for_each(|v| *v /= norm);
        self.normalized = true;
        Ok(self)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Mutable access; clears the normalized flag.
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        self.normalized = false;
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.grid.norm_sqr(&self.values).sqrt()
    }

    pub fn same_grid(&self, other: &WaveFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// `⟨self, other⟩`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(self.grid.inner(&self.values, &other.values))
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &WaveFunction) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let diff: Vec<Complex64> = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(self.grid.norm_sqr(&diff).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub solver_tol: f64,
    pub max_solver_iters: usize,
}

impl PropagatorConfig {
    pub fn new(dt: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::param("t_final", format!("must be positive, got {t_final}")));
        }
        if dt > t_final * (1.0 + 1e-12) {
            return Err(Error::param("dt", format!("{dt} exceeds t_final {t_final}")));
        }
        Ok(Self {
            dt,
            t_final,
            solver_tol: 1e-10,
            max_solver_iters: 10_000,
        })
    }

    pub fn with_solver(mut self, tol: f64, max_iters: usize) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::param("solver_tol", format!("must lie in (0, 1), got {tol}")));
        }
        if max_iters == 0 {
            return Err(Error::param("max_solver_iters", "must be positive"));
        }
        self.solver_tol = tol;
        self.max_solver_iters = max_iters;
        Ok(self)
    }

    /// Number of steps; the last recorded time is `steps·dt ≥ t_final`.
    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Warning text when `dt·‖H‖_∞` exceeds the recommended bound 2.
    pub fn stiffness_warning(&self, h: &OperatorMatrix) -> Option<String> {
        let product = self.dt * h.norm_bound();
        (product > 2.0).then(|| {
            format!("dt*|H|_inf = {product:.3e} exceeds 2; accuracy rests on the state's energy content")
        })
    }
}

/// Repeated Cayley steps `(I + iτH)⁻¹(I − iτH)`, τ = dt/2, for one operator.
///
/// Negative `dt` runs backwards in time.
pub struct CrankNicolson<'a> {
    h: &'a OperatorMatrix,
    dt: f64,
    tol: f64,
    max_iters: usize,
    solver: ShiftedSolver,
    rhs: Vec<Complex64>,
    hpsi: Vec<Complex64>,
    last_iterations: usize,
    total_iterations: usize,
}

impl<'a> CrankNicolson<'a> {
    pub fn new(h: &'a OperatorMatrix, dt: f64, tol: f64, max_iters: usize) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::param(
                "H",
                format!("not self-adjoint in the grid inner product (asymmetry {:.3e})", h.asymmetry()),
            ));
        }
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::param("dt", "must be finite and non-zero"));
        }
        let weight = (!h.grid().is_flat()).then(|| h.grid().weight());
        let n = h.dim();
        Ok(Self {
            h,
            dt,
            tol,
            max_iters,
            solver: ShiftedSolver::new(h.csr(), 0.5 * dt, weight),
            rhs: vec![Complex64::new(0.0, 0.0); n],
            hpsi: vec![Complex64::new(0.0, 0.0); n],
            last_iterations: 0,
            total_iterations: 0,
        })
    }

    pub fn from_config(h: &'a OperatorMatrix, cfg: &PropagatorConfig) -> Result<Self> {
        Self::new(h, cfg.dt, cfg.solver_tol, cfg.max_solver_iters)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    /// Advances `psi` by one step in place.
    pub fn step(&mut self, psi: &mut WaveFunction) -> Result<()> {
        if !self.h.same_grid(psi.grid()) {
            return Err(Error::GridMismatch);
        }
        let tau = 0.5 * self.dt;
        let it = Complex64::new(0.0, tau);
        self.h.apply_into(&psi.values, &mut self.hpsi);
        for ((r, p), hp) in self.rhs.iter_mut().zip(&psi.values).zip(&self.hpsi) {
            *r = p - it * hp;
        }
        let weight = psi.grid.weight();
        let flat = psi.grid.is_flat();
        let reference = psi
            .values
            .iter()
            .zip(weight)
            .map(|(v, w)| v.norm_sqr() * if flat { 1.0 } else { w * w })
            .sum::<f64>()
            .sqrt();
        if reference == 0.0 {
            self.last_iterations = 0;
            return Ok(());
        }
        // initial guess ψ − 2iτHψ, exact to first order in τ
        let x = &mut psi.values;
        x.copy_from_slice(&self.rhs);
        for (xi, hp) in x.iter_mut().zip(&self.hpsi) {
            *xi -= it * hp;
        }
        let stats = self
            .solver
            .solve(self.h.csr(), &self.rhs, x, self.tol, reference, self.max_iters);
        self.last_iterations = stats.iterations;
        self.total_iterations += stats.iterations;
        if !stats.converged {
            return Err(Error::SolverDiverged {
                iterations: stats.iterations,
                residual: stats.residual,
            });
        }
        Ok(())
    }
}

/// One Crank–Nicolson step `(I + i·dt/2·H)⁻¹(I − i·dt/2·H)ψ`.
pub fn step_crank_nicolson(h: &OperatorMatrix, psi: &WaveFunction, dt: f64, tol: f64) -> Result<WaveFunction> {
    let mut out = psi.clone();
    let mut stepper = CrankNicolson::new(h, dt, tol, 10_000)?;
    stepper.step(&mut out)?;
    out.normalized = psi.normalized && (out.norm() - 1.0).abs() <= 1e-10;
    Ok(out)
}

/// Named scalar estimator evaluated on the state at every recorded time.
pub struct Observer<'a> {
    pub name: String,
    estimator: Box<dyn Fn(&WaveFunction) -> Result<f64> + Send + Sync + 'a>,
}

impl<'a> Observer<'a> {
    pub fn new(
        name: impl Into<String>,
        estimator: impl Fn(&WaveFunction) -> Result<f64> + Send + Sync + 'a,
    ) -> Self {
        Self {
            name: name.into(),
            estimator: Box::new(estimator),
        }
    }

    pub fn evaluate(&self, psi: &WaveFunction) -> Result<f64> {
        (self.estimator)(psi)
    }
}

/// Propagates `psi0` under `h` up to `cfg.t_final`, recording `norm`,
/// `energy` and every observer at each step including t = 0.
///
/// A norm drift above [`NORM_DRIFT_TOL`] aborts the run.
pub fn propagate(
    h: &OperatorMatrix,
    psi0: &WaveFunction,
    cfg: &PropagatorConfig,
    observers: &[Observer<'_>],
) -> Result<(TrajectoryRecord, WaveFunction)> {
    if !h.same_grid(psi0.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut names = vec!["norm".to_string(), "energy".to_string()];
    names.extend(observers.iter().map(|o| o.name.clone()));
    let mut record = TrajectoryRecord::new(names)?;
    record.metadata.grid = psi0.grid().describe();
    record.metadata.warnings.extend(cfg.stiffness_warning(h));

    let mut stepper = CrankNicolson::from_config(h, cfg)?;
    let mut psi = psi0.clone();
    let norm0 = psi.norm();
    let mut row = Vec::with_capacity(2 + observers.len());
    let mut sample = |t: f64, psi: &WaveFunction, record: &mut TrajectoryRecord| -> Result<()> {
        let norm = psi.norm();
        if (norm - norm0).abs() > NORM_DRIFT_TOL {
            return Err(Error::NormDrift {
                drift: (norm - norm0).abs(),
                time: t,
            });
        }
        row.clear();
        row.push(norm);
        row.push(h.expectation(psi.values()));
        for o in observers {
            row.push(o.evaluate(psi)?);
        }
        record.push(t, &row)
    };
    sample(0.0, &psi, &mut record)?;
    for k in 1..=cfg.steps() {
        stepper.step(&mut psi)?;
        sample(k as f64 * cfg.dt, &psi, &mut record)?;
    }
    psi.normalized = psi0.normalized && (psi.norm() - 1.0).abs() <= 1e-10;
    Ok((record, psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{oscillator_1d, Axis, Boundary, CsrAssembler, GridKind};

    fn line_grid(n1: usize, n2: usize) -> Arc<Grid2D> {
        Arc::new(Grid2D::new(
            GridKind::Cartesian,
            Axis::new("x", -1.0, 1.0, n1, Boundary::Dirichlet).unwrap(),
            Axis::new("y", -1.0, 1.0, n2, Boundary::Dirichlet).unwrap(),
        ))
    }

    fn diag_op(grid: &Arc<Grid2D>, e: impl Fn(usize) -> f64) -> OperatorMatrix {
        let d: Vec<f64> = (0..grid.len()).map(e).collect();
        OperatorMatrix::diagonal_from(grid.clone(), &d).unwrap()
    }

    fn bump(grid: &Arc<Grid2D>) -> WaveFunction {
        let v = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.point(k);
                Complex64::new((-(x * x + 2.0 * y * y) * 4.0).exp(), 0.3 * x * (-(x * x + y * y) * 4.0).exp())
            })
            .collect();
        WaveFunction::new(grid.clone(), v).unwrap().normalize().unwrap()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let g = line_grid(16, 16);
        let h = diag_op(&g, |_| 0.0);
        let psi = bump(&g);
        let out = step_crank_nicolson(&h, &psi, 0.1, 1e-12).unwrap();
        assert_eq!(out.values(), psi.values());
    }

    #[test]
    fn diagonal_hamiltonian_gives_cayley_phase() {
        let g = line_grid(16, 16);
        let e = |k: usize| 0.5 * k as f64;
        let h = diag_op(&g, e);
        let psi = bump(&g);
        let dt = 0.01;
        let out = step_crank_nicolson(&h, &psi, dt, 1e-13).unwrap();
        for k in 0..g.len() {
            let z = Complex64::new(1.0, -0.5 * dt * e(k)) / Complex64::new(1.0, 0.5 * dt * e(k));
            let expect = psi.values()[k] * z;
            assert!((out.values()[k] - expect).norm() < 1e-12);
            assert!((z.arg() + 2.0 * (0.5 * dt * e(k)).atan()).abs() < 1e-12);
        }
    }

    #[test]
    fn record_has_two_points_for_one_step() {
        let g = line_grid(16, 16);
        let h = diag_op(&g, |k| k as f64);
        let cfg = PropagatorConfig::new(0.1, 0.1).unwrap();
        let (rec, _) = propagate(&h, &bump(&g), &cfg, &[]).unwrap();
        assert_eq!(rec.times(), &[0.0, 0.1]);
        assert_eq!(rec.names(), &["norm".to_string(), "energy".to_string()]);
    }

    #[test]
    fn config_validation() {
        assert!(PropagatorConfig::new(0.0, 1.0).is_err());
        assert!(PropagatorConfig::new(0.1, -1.0).is_err());
        assert!(PropagatorConfig::new(2.0, 1.0).is_err());
        let c = PropagatorConfig::new(0.02, 1.0).unwrap();
        assert_eq!(c.steps(), 50);
        assert_eq!(c.solver_tol, 1e-10);
        assert_eq!(c.max_solver_iters, 10_000);
        assert!(c.with_solver(0.0, 10).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = line_grid(16, 16);
        let mut asm = CsrAssembler::new(g.len());
        let mut row = Vec::new();
        for i in 0..g.len() {
            row.clear();
            row.push((i, 1e4 * ((i * 7919) % 101) as f64));
            if i + 1 < g.len() {
                row.push((i + 1, 3e3));
            }
            if i > 0 {
                row.push((i - 1, 3e3));
            }
            asm.push_row(&mut row);
        }
        let h = OperatorMatrix::new(g.clone(), asm.finish()).unwrap();
        let mut psi = bump(&g);
        let mut cn = CrankNicolson::new(&h, 0.1, 1e-14, 2).unwrap();
        match cn.step(&mut psi) {
            Err(Error::SolverDiverged { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coherent_state_follows_classical_orbit() {
        // H = λ²·½(−∂_y² + ω²y²) in y; a shifted ground state oscillates
        // with angular frequency λ²ω and keeps its amplitude
        let (lambda, omega, y0) = (2.0, 1.0, 1.0);
        let yax = Axis::new("y", -8.0, 8.0, 255, Boundary::Dirichlet).unwrap();
        let g = Arc::new(Grid2D::new(
            GridKind::NormalBundle,
            Axis::new("s", 0.0, 1.0, 16, Boundary::Periodic).unwrap(),
            yax.clone(),
        ));
        let ho = oscillator_1d(&yax, omega);
        let mut asm = CsrAssembler::new(g.len());
        let mut row = Vec::new();
        for i in 0..16 {
            for j in 0..yax.count {
                row.clear();
                row.extend(ho.row(j).map(|(jj, v)| (g.index(i, jj), lambda * lambda * v)));
                asm.push_row(&mut row);
            }
        }
        let h = OperatorMatrix::new(g.clone(), asm.finish()).unwrap();
        let v = (0..g.len())
            .map(|k| {
                let y = g.point(k)[1];
                Complex64::new((-0.5 * omega * (y - y0).powi(2)).exp(), 0.0)
            })
            .collect();
        let psi0 = WaveFunction::new(g.clone(), v).unwrap().normalize().unwrap();
        let period = std::f64::consts::TAU / (lambda * lambda * omega);
        let cfg = PropagatorConfig::new(period / 400.0, period).unwrap().with_solver(1e-12, 1000).unwrap();
        let ys: Vec<f64> = (0..g.len()).map(|k| g.point(k)[1]).collect();
        let obs = [Observer::new("y_mean", |p: &WaveFunction| Ok(p.grid().expectation_of(&ys, p.values())))];
        let (rec, _) = propagate(&h, &psi0, &cfg, &obs).unwrap();
        let ym = rec.series("y_mean").unwrap();
        for (t, y) in rec.times().iter().zip(ym) {
            let classical = y0 * (lambda * lambda * omega * t).cos();
            assert!((y - classical).abs() <= 0.01 * y0, "t={t}: {y} vs {classical}");
        }
        let e = rec.series("energy").unwrap();
        let drift = e.iter().map(|x| (x - e[0]).abs()).fold(0.0, f64::max) / e[0].abs();
        assert!(drift <= 1e-6, "energy drift {drift}");
    }
}
