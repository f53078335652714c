//! Acceptance suite: the oracle gate, propagator properties, the E1 and E2
//! sweeps and the hypothesis bounds. Every criterion is recomputed here from
//! the stored CSVs and compared with the manifest verdict; one line is
//! printed per criterion.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use confined_qdyn::diagnostics::TrajectoryRecord;
use confined_qdyn::harness::{read_csv, run_experiment, ExperimentConfig, RunManifest};
use confined_qdyn::oracles::{gaussian_moment, validation_suite, GaussianMoment};

const PROPAGATOR_TOL: f64 = 1e-6;
const DT_RATIO: (f64, f64) = (3.0, 5.0);
const VALIDATE_SECONDS: f64 = 60.0;
const E1_SECONDS: f64 = 15.0 * 60.0;
const E2_SECONDS: f64 = 30.0 * 60.0;
const NOISE_FLOOR: f64 = 1e-12;
const CUTOFF_RATIO: f64 = 0.25;
const SPREAD: f64 = 2.0;
const E2_RATIO: f64 = 0.5;
const Q0_REL: f64 = 0.01;
const TAIL_MAX: f64 = 1e-4;
const HYPOTHESIS_FACTOR: f64 = 2.0;

const E1_CONFIG: &str = "\
experiment = e1
curve.kind = circle
curve.params = 1.0
profile.omega = 1
tube.delta = 0.5
tube.epsilon = 0.3
lambdas = [2, 4, 8]
T = 0.5
";

// ε close to δ keeps the F₂ plateau |y| ≤ λε/2 wider than the oscillator
// ground state at λ = 4, so q(0) measures the tangential energy.
const E2_CONFIG: &str = "\
experiment = e2
curve.kind = circle
curve.params = 1.0
profile.omega = 1
profile.v0 = 0.5
tube.delta = 0.9
tube.epsilon = 0.85
state.k0 = 2
state.w_s = 0.5
lambdas = [4, 8, 16]
T = 1.0
";

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn report(lines: &mut Vec<Line>, id: &'static str, pass: bool, detail: String) {
    // bypasses the test harness capture so the lines show in every run
    let _ = writeln!(std::io::stderr(), "{id} {}  {detail}", if pass { "PASS" } else { "FAIL" });
    lines.push(Line { id, pass, detail });
}

fn run(config: &str, dir: &Path) -> (RunManifest, Vec<(f64, TrajectoryRecord)>, f64) {
    let mut cfg = ExperimentConfig::parse(config).unwrap();
    cfg.output_dir = dir.to_path_buf();
    let clock = Instant::now();
    let manifest = run_experiment(&cfg).unwrap();
    let seconds = clock.elapsed().as_secs_f64();
    let records = manifest
        .lambdas
        .iter()
        .map(|s| (s.lambda, read_csv(&dir.join(&s.csv)).unwrap()))
        .collect();
    (manifest, records, seconds)
}

fn sups(records: &[(f64, TrajectoryRecord)], name: &str) -> Vec<f64> {
    records.iter().map(|(_, r)| r.sup(name).unwrap()).collect()
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn strictly_decreasing(v: &[f64], floor: f64) -> bool {
    v.windows(2).all(|w| w[1] < w[0] || w[1] < floor)
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn last_over_first(v: &[f64]) -> f64 {
    v[v.len() - 1] / v[0]
}

/// Norm drift, relative energy drift and time-reversal error of a sweep.
fn propagator_ok(m: &RunManifest, records: &[(f64, TrajectoryRecord)], pairs: &[(&str, &str)]) -> (bool, String) {
    let mut ok = true;
    let mut worst = [0.0f64; 3];
    for (_, r) in records {
        for (norm, energy) in pairs {
            let n = r.drift(norm, false).unwrap();
            let e = r.drift(energy, true).unwrap();
            worst[0] = worst[0].max(n);
            worst[1] = worst[1].max(e);
        }
    }
    for s in &m.lambdas {
        worst[2] = worst[2].max(s.value("reversal_error").expect("time reversal recorded"));
    }
    ok &= worst.iter().all(|w| *w <= PROPAGATOR_TOL);
    (
        ok,
        format!(
            "{:?}: norm drift {:.2e}, energy drift {:.2e}, reversal {:.2e}",
            m.experiment, worst[0], worst[1], worst[2]
        ),
    )
}

fn agrees(m: &RunManifest, id: &str, pass: bool) {
    let v = m.verdict(id).unwrap_or_else(|| panic!("manifest lacks a verdict for {id}"));
    assert_eq!(v.pass, pass, "{id}: manifest verdict disagrees ({})", v.detail);
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    let tmp = tempfile::tempdir().unwrap();

    // oracle gate
    let clock = Instant::now();
    let reports = validation_suite().unwrap();
    let seconds = clock.elapsed().as_secs_f64();
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    let find = |name: &str| reports.iter().find(|r| r.name == name).unwrap();
    let cn = find("cn_vs_expm_24x24(dt=1e-3,T=0.5)");
    let ho = find("grid_oscillator_ground[-8,8]x256");
    let a1 = failed.is_empty() && cn.measured <= 1e-3 && ho.abs_err <= 1e-3 && seconds < VALIDATE_SECONDS;
    report(
        &mut lines,
        "A1",
        a1,
        format!(
            "CN vs expm {:.3e} (<= 1e-3), oscillator error {:.3e} (<= 1e-3), failed {failed:?}, {seconds:.1} s (< 60 s)",
            cn.measured, ho.abs_err
        ),
    );

    let e1_dir = tmp.path().join("e1");
    let (m1, r1, e1_seconds) = run(E1_CONFIG, &e1_dir);
    let e2_dir = tmp.path().join("e2");
    let (m2, r2, e2_seconds) = run(E2_CONFIG, &e2_dir);

    // propagator properties on every run and dt halving on the oracle problem
    let (ok1, d1) = propagator_ok(&m1, &r1, &[("norm", "energy"), ("dirichlet_norm", "dirichlet_energy")]);
    let (ok2, d2) = propagator_ok(&m2, &r2, &[("norm", "energy"), ("effective_norm", "effective_energy")]);
    let ratio = find("cn_dt_halving_ratio").measured;
    let ratio_ok = (DT_RATIO.0..=DT_RATIO.1).contains(&ratio)
        && [&m1, &m2]
            .iter()
            .all(|m| m.dt_halving_ratio.is_some_and(|r| (DT_RATIO.0..=DT_RATIO.1).contains(&r)));
    let a2 = ok1 && ok2 && ratio_ok;
    agrees(&m1, "A2", ok1 && ratio_ok);
    agrees(&m2, "A2", ok2 && ratio_ok);
    report(&mut lines, "A2", a2, format!("{d1}; {d2}; dt-halving ratio {ratio:.3} in [3, 5]"));

    // E1: cutoff mass outside d < ε
    let mass = sups(&r1, "cutoff_mass");
    let mass_s = sci(&mass);
    let below = *mass.last().unwrap() < NOISE_FLOOR;
    let decay = strictly_decreasing(&mass, NOISE_FLOOR) && (last_over_first(&mass) <= CUTOFF_RATIO || below);
    agrees(&m1, "A3", decay);
    let a3 = decay && e1_seconds <= E1_SECONDS;
    report(
        &mut lines,
        "A3",
        a3,
        format!(
            "sup cutoff mass {mass_s}, ratio {:.4} (<= 0.25), {e1_seconds:.0} s (<= 900 s)",
            last_over_first(&mass)
        ),
    );

    // E1: Dirichlet comparison
    let derr = sups(&r1, "dirichlet_error");
    let initial: Vec<f64> = r1.iter().map(|(_, r)| r.series("dirichlet_error").unwrap()[0]).collect();
    let (derr_s, initial_s) = (sci(&derr), sci(&initial));
    let rate = non_increasing(&derr) && last_over_first(&derr) <= 0.25f64.powf(0.25);
    agrees(&m1, "A4", rate);
    let a4 = rate && initial.iter().all(|e| *e <= 1e-8);
    report(
        &mut lines,
        "A4",
        a4,
        format!(
            "sup Dirichlet error {derr_s}, ratio {:.4} (<= 0.7071), t = 0 values {initial_s}",
            last_over_first(&derr)
        ),
    );

    // E2: effective dynamics
    let err = sups(&r2, "err");
    let err0: Vec<f64> = r2.iter().map(|(_, r)| r.series("err").unwrap()[0]).collect();
    let err_s = sci(&err);
    let rate = strictly_decreasing(&err, 0.0) && last_over_first(&err) <= E2_RATIO;
    agrees(&m2, "A5", rate);
    let a5 = rate && err0.iter().all(|e| *e == 0.0) && e2_seconds <= E2_SECONDS;
    report(
        &mut lines,
        "A5",
        a5,
        format!(
            "sup err {err_s}, ratio {:.4} (<= 0.5), {e2_seconds:.0} s (<= 1800 s)",
            last_over_first(&err)
        ),
    );

    // E2: energy transfer
    let q_ratio = sups(&r2, "q_ratio");
    let q_ref = gaussian_moment(GaussianMoment::P2, 0.5, 2.0).unwrap() + 1.0;
    let q0: Vec<f64> = r2.iter().map(|(_, r)| r.series("q").unwrap()[0]).collect();
    let a6 = spread(&q_ratio) < SPREAD && q0.iter().all(|q| ((q - q_ref) / q_ref).abs() <= Q0_REL);
    agrees(&m2, "A6", a6);
    report(
        &mut lines,
        "A6",
        a6,
        format!(
            "sup q/q0 {q_ratio:.4?} spread {:.4} (< 2), q(0) {q0:.4?} against {q_ref} (1%)",
            spread(&q_ratio)
        ),
    );

    // E2: state diagnostics; ⟨n²⟩ = ⟨y²⟩/λ² scales as λ⁻² by construction,
    // so the bounded-variation check applies to the scaled moment ⟨y²⟩
    let y2 = sups(&r2, "y2");
    let n2 = sups(&r2, "n2");
    let dy = sups(&r2, "dy_norm2");
    let dx = sups(&r2, "dx_norm_scaled");
    let tail = r2.last().unwrap().1.sup("tail_f3").unwrap();
    let n2_s = sci(&n2);
    let a7 = spread(&y2) < SPREAD && spread(&dy) < SPREAD && non_increasing(&dx) && tail <= TAIL_MAX;
    agrees(&m2, "A7", a7);
    report(
        &mut lines,
        "A7",
        a7,
        format!(
            "sup <y^2> {y2:.4?} spread {:.3} (<n^2> {n2_s} spread {:.1}), sup |D_y psi|^2 spread {:.3}, \
             sup |D_s psi|/lambda {dx:.4?}, tail(lambda=16) {tail:.2e} (<= 1e-4)",
            spread(&y2),
            spread(&n2),
            spread(&dy)
        ),
    );

    // hypothesis bounds at λ_min scale
    let w = sups(&r1, "w_scaled");
    let hyp: Vec<f64> = m2.lambdas.iter().map(|s| s.value("hypothesis").unwrap()).collect();
    let bounded = |v: &[f64]| v.iter().all(|x| *x <= HYPOTHESIS_FACTOR * v[0]);
    let a8 = bounded(&w) && bounded(&hyp);
    agrees(&m1, "A8", bounded(&w));
    agrees(&m2, "A8", bounded(&hyp));
    report(
        &mut lines,
        "A8",
        a8,
        format!("E1 sup lambda^2 <W> {w:.4?}; E2 |L psi0|/lambda^2 {hyp:.4?} (<= 2x lambda_min value)"),
    );

    let failed: Vec<String> = lines
        .iter()
        .filter(|l| !l.pass)
        .map(|l| format!("{}: {}", l.id, l.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
