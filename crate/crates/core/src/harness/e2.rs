//! Normal-bundle sweep: L_λ against the effective operator L₀,λ from the
//! same standard state, with q(t), moments and the transverse tail.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use super::{check_norm, CountRule, ExperimentConfig, LambdaRun, LambdaSummary};
use crate::diagnostics::{moment_diagnostics, overlap_distance, q_value, tail_mass_f3, RunMetadata, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::geometry::Curve;
use crate::operators::{
    build_effective_hamiltonian, build_normalbundle_hamiltonian, build_tangential_observable,
    check_normal_bundle_grid, Grid2D, MIN_AXIS_COUNT,
};
use crate::propagation::{make_standard_state, CrankNicolson, PropagatorConfig, StateSpace, WaveFunction};

pub(super) const SERIES: &[&str] = &[
    "norm",
    "energy",
    "effective_norm",
    "effective_energy",
    "err",
    "q",
    "q_ratio",
    "mu",
    "n2",
    "y2",
    "dy_norm2",
    "dx_norm2_scaled",
    "dx_norm_scaled",
    "tail_f3",
];

pub(super) const FIT_TARGETS: &[&str] = &["err"];

/// Smallest `y` count resolving the oscillator ground state.
const AUTO_Y_COUNT: usize = 127;

/// `(s, y)` grid: `s` over the whole curve, `y ∈ [−y_max, y_max]`.
pub(super) fn grid_for(cfg: &ExperimentConfig, curve: &Curve, _lambda: f64) -> Result<Arc<Grid2D>> {
    let width = cfg.profile.omega.powf(-0.5);
    let y_max = cfg.grid.y_max.unwrap_or(8.0 * width);
    let y_count = match cfg.grid.y_count {
        CountRule::Auto => {
            let cells = (2.0 * y_max / (width / 8.0)).ceil() as usize;
            cells.saturating_sub(1).max(AUTO_Y_COUNT)
        }
        CountRule::Fixed(n) => n,
    };
    if cfg.grid.s_count < MIN_AXIS_COUNT {
        return Err(Error::Config {
            key: "grid.s_count".into(),
            reason: format!("must be at least {MIN_AXIS_COUNT}"),
        });
    }
    let grid = Grid2D::normal_bundle(curve.length(), cfg.grid.s_count, y_max, y_count)?;
    check_normal_bundle_grid(&grid, curve, &cfg.profile)?;
    Ok(Arc::new(grid))
}

pub(super) fn run_lambda(
    cfg: &ExperimentConfig,
    curve: &Curve,
    lambda: f64,
    grid: Arc<Grid2D>,
    config_hash: &str,
) -> Result<LambdaRun> {
    let clock = Instant::now();
    let l = build_normalbundle_hamiltonian(&grid, curve, &cfg.profile, lambda, &cfg.tube)?;
    let l0 = build_effective_hamiltonian(&grid, curve, &cfg.profile, lambda)?;
    let qbar = build_tangential_observable(&grid, curve, &cfg.tube, lambda)?;
    let psi0 = make_standard_state(
        &grid,
        curve,
        &cfg.profile,
        lambda,
        StateSpace::NormalBundle,
        &cfg.state,
        &cfg.tube,
    )?;

    let dt = cfg.dt_rule.dt(lambda);
    let pc = PropagatorConfig::new(dt, cfg.t_final)?.with_solver(cfg.solver_tol, cfg.max_solver_iters)?;
    let steps = pc.steps();
    let mut record = TrajectoryRecord::new(SERIES.iter().map(|s| s.to_string()).collect())?;
    let mut warnings: Vec<String> = pc.stiffness_warning(&l).into_iter().collect();
    warnings.extend(pc.stiffness_warning(&l0).map(|w| format!("effective run: {w}")));
    record.metadata = RunMetadata {
        lambda: Some(lambda),
        grid: grid.describe(),
        config_hash: config_hash.into(),
        warnings: warnings.clone(),
    };

    let q0 = q_value(&psi0, &qbar)?;
    let l2 = lambda * lambda;
    let norm0 = psi0.norm();
    let mut sample = |t: f64, psi: &WaveFunction, psi_eff: &WaveFunction| -> Result<()> {
        let (norm, norm_eff) = (psi.norm(), psi_eff.norm());
        check_norm(norm, norm0, t)?;
        check_norm(norm_eff, norm0, t)?;
        let energy = l.expectation(psi.values());
        let q = q_value(psi, &qbar)?;
        let m = moment_diagnostics(psi, lambda, None, cfg.profile.omega)?;
        let dx2 = m.dx_norm2_scaled.expect("normal-bundle grid");
        record.push(
            t,
            &[
                norm,
                energy,
                norm_eff,
                l0.expectation(psi_eff.values()),
                overlap_distance(psi, psi_eff)?,
                q,
                q / q0,
                energy / l2,
                m.n2.expect("normal-bundle grid"),
                m.y2.expect("normal-bundle grid"),
                m.dy_norm2.expect("normal-bundle grid"),
                dx2,
                dx2.sqrt(),
                tail_mass_f3(psi, lambda, cfg.s_exp)?,
            ],
        )
    };

    let mut psi = psi0.clone();
    let mut psi_eff = psi0.clone();
    let mut cn = CrankNicolson::from_config(&l, &pc)?;
    let mut cn_eff = CrankNicolson::from_config(&l0, &pc)?;
    sample(0.0, &psi, &psi_eff)?;
    for k in 1..=steps {
        cn.step(&mut psi)?;
        cn_eff.step(&mut psi_eff)?;
        sample(k as f64 * dt, &psi, &psi_eff)?;
    }

    let mut values = BTreeMap::new();
    if cfg.time_reversal {
        let mut back = CrankNicolson::new(&l, -dt, cfg.solver_tol, cfg.max_solver_iters)?;
        for _ in 0..steps {
            back.step(&mut psi)?;
        }
        values.insert("reversal_error".into(), psi.distance(&psi0)?);
    }
    let drift = |a: &str, b: &str, rel: bool| {
        record
            .drift(a, rel)
            .unwrap_or(0.0)
            .max(record.drift(b, rel).unwrap_or(0.0))
    };
    values.insert("norm_drift".into(), drift("norm", "effective_norm", false));
    values.insert("energy_drift".into(), drift("energy", "effective_energy", true));
    values.insert("q0".into(), q0);
    values.insert("mu".into(), record.series("mu").expect("series")[0]);
    values.insert("hypothesis".into(), l.apply_norm(psi0.values()) / l2);

    let summary = LambdaSummary {
        lambda,
        dt,
        steps,
        grid: grid.describe(),
        csv: String::new(),
        sup: BTreeMap::new(),
        values,
        solver_iterations: cn.total_iterations() + cn_eff.total_iterations(),
        seconds: clock.elapsed().as_secs_f64(),
        warnings,
    };
    Ok(LambdaRun { summary, record })
}
