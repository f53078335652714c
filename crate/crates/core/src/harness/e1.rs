//! Full-space sweep: H_λ on a box against its Dirichlet restriction to the
//! tube, both started from the standard state.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use super::{check_norm, ExperimentConfig, CountRule, LambdaRun, LambdaSummary};
use crate::diagnostics::{moment_diagnostics, RunMetadata, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::geometry::Curve;
use crate::operators::{
    dirichlet_hamiltonian_on, fullspace_hamiltonian_on, fullspace_resolution_limit, CurveFrame, Grid2D,
    Region, MIN_AXIS_COUNT,
};
use crate::propagation::{standard_state_on_frame, CrankNicolson, PropagatorConfig, WaveFunction};

pub(super) const SERIES: &[&str] = &[
    "norm",
    "energy",
    "dirichlet_norm",
    "dirichlet_energy",
    "cutoff_mass",
    "dirichlet_error",
    "grad_norm2",
    "w_expectation",
    "w_scaled",
];

pub(super) const FIT_TARGETS: &[&str] = &["cutoff_mass", "dirichlet_error"];

/// Square box resolving the transverse ground state at `lambda`.
pub(super) fn grid_for(cfg: &ExperimentConfig, curve: &Curve, lambda: f64) -> Result<Arc<Grid2D>> {
    let half = cfg.grid.box_half.unwrap_or(curve.max_radius() + 1.0);
    if half < curve.max_radius() + cfg.tube.delta {
        return Err(Error::Config {
            key: "grid.box_half".into(),
            reason: format!("{half} does not contain the tube of radius {}", cfg.tube.delta),
        });
    }
    let limit = fullspace_resolution_limit(lambda, cfg.profile.omega);
    let count = match cfg.grid.box_count {
        CountRule::Auto => (((2.0 * half / limit).ceil() as usize).saturating_sub(1)).max(MIN_AXIS_COUNT),
        CountRule::Fixed(n) => n,
    };
    let grid = Grid2D::cartesian_box(half, count)?;
    grid.axis1.check_spacing(limit)?;
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
    let frame = CurveFrame::compute(&grid, curve);
    let h = fullspace_hamiltonian_on(&grid, &frame, curve, &cfg.profile, lambda)?;
    let hd = dirichlet_hamiltonian_on(&grid, &frame, curve, &cfg.profile, lambda, &cfg.tube)?;

    let psi0 = standard_state_on_frame(&grid, &frame, curve, &cfg.profile, lambda, &cfg.state, &cfg.tube)?;
    let inside = frame.tube_mask(cfg.tube.delta);
    let restricted = psi0
        .values()
        .iter()
        .zip(&inside)
        .map(|(v, &m)| if m { *v } else { Complex64::new(0.0, 0.0) })
        .collect();
    let psi0_d = WaveFunction::new(grid.clone(), restricted)?.normalize()?;

    let eps = cfg.tube.epsilon;
    let outer = Region::DistanceAtLeast(eps).profile(&grid, Some(&frame), false, 0.0)?;
    let inner = Region::DistanceAtMost(eps).profile(&grid, Some(&frame), false, 0.0)?;
    let omega = cfg.profile.omega;

    let dt = cfg.dt_rule.dt(lambda);
    let pc = PropagatorConfig::new(dt, cfg.t_final)?.with_solver(cfg.solver_tol, cfg.max_solver_iters)?;
    let steps = pc.steps();
    let mut record = TrajectoryRecord::new(SERIES.iter().map(|s| s.to_string()).collect())?;
    let mut warnings: Vec<String> = pc.stiffness_warning(&h).into_iter().collect();
    warnings.extend(pc.stiffness_warning(&hd).map(|w| format!("dirichlet run: {w}")));
    record.metadata = RunMetadata {
        lambda: Some(lambda),
        grid: grid.describe(),
        config_hash: config_hash.into(),
        warnings: warnings.clone(),
    };

    let (norm0, norm0_d) = (psi0.norm(), psi0_d.norm());
    let mut diff = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut sample = |t: f64, psi: &WaveFunction, psi_d: &WaveFunction| -> Result<()> {
        let (norm, norm_d) = (psi.norm(), psi_d.norm());
        check_norm(norm, norm0, t)?;
        check_norm(norm_d, norm0_d, t)?;
        for ((d, a), b) in diff.iter_mut().zip(psi.values()).zip(psi_d.values()) {
            *d = a - b;
        }
        let m = moment_diagnostics(psi, lambda, Some(&frame), omega)?;
        let w = m.w_expectation.expect("frame supplied");
        record.push(
            t,
            &[
                norm,
                h.expectation(psi.values()),
                norm_d,
                hd.expectation(psi_d.values()),
                grid.expectation_of(&outer, psi.values()).sqrt(),
                grid.expectation_of(&inner, &diff).sqrt(),
                m.grad_norm2.expect("Cartesian grid"),
                w,
                w * lambda * lambda,
            ],
        )
    };

    let mut psi = psi0.clone();
    let mut psi_d = psi0_d.clone();
    let mut cn = CrankNicolson::from_config(&h, &pc)?;
    let mut cn_d = CrankNicolson::from_config(&hd, &pc)?;
    sample(0.0, &psi, &psi_d)?;
    for k in 1..=steps {
        cn.step(&mut psi)?;
        cn_d.step(&mut psi_d)?;
        sample(k as f64 * dt, &psi, &psi_d)?;
    }

    let mut values = BTreeMap::new();
    if cfg.time_reversal {
        let mut back = CrankNicolson::new(&h, -dt, cfg.solver_tol, cfg.max_solver_iters)?;
        for _ in 0..steps {
            back.step(&mut psi)?;
        }
        values.insert("reversal_error".into(), psi.distance(&psi0)?);
    }
    let norm_drift = record.drift("norm", false).unwrap_or(0.0);
    let norm_drift_d = record.drift("dirichlet_norm", false).unwrap_or(0.0);
    let energy_drift = record.drift("energy", true).unwrap_or(0.0);
    let energy_drift_d = record.drift("dirichlet_energy", true).unwrap_or(0.0);
    values.insert("norm_drift".into(), norm_drift.max(norm_drift_d));
    values.insert("energy_drift".into(), energy_drift.max(energy_drift_d));
    values.insert("initial_energy".into(), record.series("energy").expect("series")[0]);
    values.insert("initial_w_scaled".into(), record.series("w_scaled").expect("series")[0]);
    values.insert("hamiltonian_norm_ratio".into(), h.apply_norm(psi0.values()) / (lambda * lambda));
    values.insert("dirichlet_initial_overlap".into(), psi0.inner(&psi0_d)?.norm());

    let summary = LambdaSummary {
        lambda,
        dt,
        steps,
        grid: grid.describe(),
        csv: String::new(),
        sup: BTreeMap::new(),
        values,
        solver_iterations: cn.total_iterations() + cn_d.total_iterations(),
        seconds: clock.elapsed().as_secs_f64(),
        warnings,
    };
    Ok(LambdaRun { summary, record })
}
