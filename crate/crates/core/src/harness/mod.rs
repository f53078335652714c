//! Experiment runner: configuration, the full-space (E1) and normal-bundle
//! (E2) λ sweeps, CSV/JSON persistence, rate fits, verdicts and SVG plots.

pub mod config;
mod e1;
mod e2;
mod persist;
mod plot;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{load_config, CountRule, DtRule, ExperimentConfig, ExperimentKind, GridSpec};
pub use persist::{csv_file_name, load_runs, read_csv, refit_dir, write_csv, RefitReport};
pub use plot::{emit_plots, PlotReport};

use crate::diagnostics::{fit_rate_above_floor, RateFit, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::operators::Grid2D;
use crate::oracles::{dt_halving_ratio, validation_suite, OracleReport};
use crate::propagation::NORM_DRIFT_TOL;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Caps the number of λ values propagated concurrently.
pub const THREADS_ENV: &str = "CONFINED_QDYN_THREADS";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Bound on norm drift, relative energy drift and time-reversal error.
pub const PROPAGATOR_TOL: f64 = 1e-6;
pub const DT_RATIO_RANGE: (f64, f64) = (3.0, 5.0);
/// sup cutoff mass at λ_max over λ_min.
pub const CUTOFF_RATIO_MAX: f64 = 0.25;
/// sup Dirichlet error at λ_max over λ_min: (1/4)^{1/4}.
pub const DIRICHLET_RATIO_MAX: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// sup effective-dynamics error at λ_max over λ_min.
pub const EFFECTIVE_RATIO_MAX: f64 = 0.5;
/// Largest admissible max/min of a quantity across λ.
pub const SPREAD_MAX: f64 = 2.0;
pub const Q0_REL_TOL: f64 = 0.01;
pub const TAIL_MASS_MAX: f64 = 1e-4;
/// Hypothesis quantities may grow to this multiple of their λ_min value.
pub const HYPOTHESIS_FACTOR: f64 = 2.0;
pub const VALIDATE_SECONDS: f64 = 60.0;

/// Pass/fail of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(id: &str, name: &str, pass: bool, detail: String) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            pass,
            detail,
        }
    }
}

/// Per-λ results of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub dt: f64,
    pub steps: usize,
    pub grid: String,
    /// Trajectory file, relative to the output directory.
    pub csv: String,
    /// sup over t of every recorded series.
    pub sup: BTreeMap<String, f64>,
    /// Scalar measurements: drifts, time-reversal error, initial values.
    pub values: BTreeMap<String, f64>,
    pub solver_iterations: usize,
    pub seconds: f64,
    pub warnings: Vec<String>,
}

impl LambdaSummary {
    pub fn sup(&self, name: &str) -> Option<f64> {
        self.sup.get(name).copied()
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

/// sup_t values of one series against λ and their log-log fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<RateFit>,
    /// Why the fit is missing, e.g. too few points above the noise floor.
    pub note: Option<String>,
}

impl RateSeries {
    pub fn new(name: &str, points: Vec<(f64, f64)>, floor: f64) -> Self {
        let (fit, note) = match fit_rate_above_floor(&points, floor) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            name: name.into(),
            points,
            fit,
            note,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub experiment: ExperimentKind,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub lambdas: Vec<LambdaSummary>,
    pub rates: Vec<RateSeries>,
    pub dt_halving_ratio: Option<f64>,
    pub oracles: Vec<OracleReport>,
    pub verdicts: Vec<Verdict>,
    pub plots: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    pub fn rate(&self, name: &str) -> Option<&RateSeries> {
        self.rates.iter().find(|r| r.name == name)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data {
            path,
            reason: e.to_string(),
        })
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

/// Output of one λ task.
pub(crate) struct LambdaRun {
    pub summary: LambdaSummary,
    pub record: TrajectoryRecord,
}

pub(crate) fn check_norm(norm: f64, norm0: f64, time: f64) -> Result<()> {
    let drift = (norm - norm0).abs();
    if drift > NORM_DRIFT_TOL {
        return Err(Error::NormDrift { drift, time });
    }
    Ok(())
}

/// Fills `sup` from the record and writes the trajectory CSV.
pub(crate) fn finish_lambda(mut run: LambdaRun, dir: &Path, kind: ExperimentKind) -> Result<LambdaRun> {
    for name in run.record.names() {
        let s = run.record.sup(name).expect("series exists");
        run.summary.sup.insert(name.clone(), s);
    }
    let file = csv_file_name(kind, run.summary.lambda);
    write_csv(&dir.join(&file), &run.record)?;
    run.summary.csv = file;
    Ok(run)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn thread_count(lambdas: usize) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(lambdas)
        .clamp(1, lambdas.max(1))
}

/// Series whose sup over t is fitted against λ.
pub fn fit_targets(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::E1 => e1::FIT_TARGETS,
        ExperimentKind::E2 => e2::FIT_TARGETS,
        ExperimentKind::Validate => &[],
    }
}

/// Runs the configured experiment, writes CSVs, plots and `manifest.json`
/// into `cfg.output_dir`, and returns the manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let started_unix = unix_now();
    let mut manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        experiment: cfg.experiment,
        config: cfg.echo(),
        config_hash: cfg.hash(),
        started_unix,
        finished_unix: started_unix,
        lambdas: Vec::new(),
        rates: Vec::new(),
        dt_halving_ratio: None,
        oracles: Vec::new(),
        verdicts: Vec::new(),
        plots: Vec::new(),
        warnings: Vec::new(),
    };
    match cfg.experiment {
        ExperimentKind::Validate => {
            let clock = Instant::now();
            manifest.oracles = validation_suite()?;
            let seconds = clock.elapsed().as_secs_f64();
            manifest.dt_halving_ratio = manifest
                .oracles
                .iter()
                .find(|r| r.name == "cn_dt_halving_ratio")
                .map(|r| r.measured);
            manifest.verdicts = validation_verdicts(&manifest.oracles, seconds);
        }
        kind => {
            let runs = sweep(cfg, &dir)?;
            manifest.lambdas = runs.into_iter().map(|r| r.summary).collect();
            manifest.rates = fit_targets(kind)
                .iter()
                .map(|name| {
                    let points = manifest
                        .lambdas
                        .iter()
                        .map(|s| (s.lambda, s.sup(name).unwrap_or(f64::NAN)))
                        .collect();
                    RateSeries::new(name, points, cfg.noise_floor)
                })
                .collect();
            for r in &manifest.rates {
                if let Some(note) = &r.note {
                    manifest.warnings.push(format!("no fit for {}: {note}", r.name));
                }
            }
            let ratio = dt_halving_ratio()?;
            manifest.dt_halving_ratio = Some(ratio);
            manifest.verdicts = experiment_verdicts(kind, cfg, &manifest.lambdas, ratio);
            for s in &manifest.lambdas {
                manifest
                    .warnings
                    .extend(s.warnings.iter().map(|w| format!("lambda = {}: {w}", s.lambda)));
            }
            let plots = emit_plots(&dir)?;
            manifest.plots = plots
                .files
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect();
            manifest.warnings.extend(plots.warnings);
        }
    }
    for file in manifest.lambdas.iter().map(|s| &s.csv).chain(&manifest.plots) {
        if !dir.join(file).is_file() {
            return Err(Error::Data {
                path: dir.join(file),
                reason: "referenced file was not written".into(),
            });
        }
    }
    manifest.finished_unix = unix_now();
    manifest.write(&dir)?;
    Ok(manifest)
}

/// Checks every grid, then propagates all λ values concurrently.
fn sweep(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<LambdaRun>> {
    let curve = cfg.curve()?;
    let hash = cfg.hash();
    let grids: Vec<Arc<Grid2D>> = cfg
        .lambdas
        .iter()
        .map(|&l| match cfg.experiment {
            ExperimentKind::E1 => e1::grid_for(cfg, &curve, l),
            _ => e2::grid_for(cfg, &curve, l),
        })
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg.lambdas.len()))
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;
    let results: Vec<Result<LambdaRun>> = pool.install(|| {
        cfg.lambdas
            .par_iter()
            .zip(grids)
            .map(|(&lambda, grid)| {
                let run = match cfg.experiment {
                    ExperimentKind::E1 => e1::run_lambda(cfg, &curve, lambda, grid, &hash)?,
                    _ => e2::run_lambda(cfg, &curve, lambda, grid, &hash)?,
                };
                finish_lambda(run, dir, cfg.experiment)
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Every consecutive pair decreases (`strict`) or does not increase; a
/// value below `floor` always passes.
pub fn decreasing(values: &[f64], strict: bool, floor: f64) -> bool {
    values
        .windows(2)
        .all(|w| w[1] < floor || if strict { w[1] < w[0] } else { w[1] <= w[0] })
}

/// max/min of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn fmt_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

fn validation_verdicts(reports: &[OracleReport], seconds: f64) -> Vec<Verdict> {
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    let a1 = failed.is_empty() && seconds < VALIDATE_SECONDS;
    let propagator = [
        "cn_norm_drift",
        "cn_energy_drift",
        "cn_time_reversal",
        "cn_dt_halving_ratio",
    ];
    let a2 = propagator
        .iter()
        .all(|n| reports.iter().any(|r| r.name == *n && r.pass));
    vec![
        Verdict::new(
            "A1",
            "oracle_gate",
            a1,
            format!("{} checks, failed {failed:?}, {seconds:.1} s", reports.len()),
        ),
        Verdict::new(
            "A2",
            "propagator_properties",
            a2,
            "norm, energy, time reversal and dt halving on the oracle problem".into(),
        ),
    ]
}

fn series_sups(runs: &[LambdaSummary], name: &str) -> Vec<f64> {
    runs.iter().map(|s| s.sup(name).unwrap_or(f64::NAN)).collect()
}

fn ratio_last_first(values: &[f64]) -> f64 {
    match (values.first(), values.last()) {
        (Some(&a), Some(&b)) => b / a,
        _ => f64::NAN,
    }
}

fn propagator_verdict(runs: &[LambdaSummary], dt_ratio: f64, time_reversal: bool) -> Verdict {
    let get = |key: &str| -> Vec<f64> { runs.iter().map(|s| s.value(key).unwrap_or(f64::NAN)).collect() };
    let norm = get("norm_drift");
    let energy = get("energy_drift");
    let reversal = get("reversal_error");
    let ok = |v: &[f64]| v.iter().all(|x| *x <= PROPAGATOR_TOL);
    let mut pass = ok(&norm) && ok(&energy) && (DT_RATIO_RANGE.0..=DT_RATIO_RANGE.1).contains(&dt_ratio);
    let mut detail = format!(
        "norm drift {}, energy drift {}, dt-halving ratio {dt_ratio:.3}",
        fmt_list(&norm),
        fmt_list(&energy)
    );
    if time_reversal {
        pass &= ok(&reversal);
        detail += &format!(", time reversal {}", fmt_list(&reversal));
    } else {
        pass = false;
        detail += ", time reversal not run";
    }
    Verdict::new("A2", "propagator_properties", pass, detail)
}

fn hypothesis_verdict(values: &[f64], what: &str) -> Verdict {
    let bound = HYPOTHESIS_FACTOR * values[0];
    let pass = values.iter().all(|v| *v <= bound);
    Verdict::new(
        "A8",
        "hypothesis_bound",
        pass,
        format!("{what} {} against {bound:.4e}", fmt_list(values)),
    )
}

fn experiment_verdicts(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    runs: &[LambdaSummary],
    dt_ratio: f64,
) -> Vec<Verdict> {
    let floor = cfg.noise_floor;
    let mut out = vec![propagator_verdict(runs, dt_ratio, cfg.time_reversal)];
    match kind {
        ExperimentKind::E1 => {
            let mass = series_sups(runs, "cutoff_mass");
            let r = ratio_last_first(&mass);
            let last_below = mass.last().is_some_and(|m| *m < floor);
            out.push(Verdict::new(
                "A3",
                "confinement_decay",
                decreasing(&mass, true, floor) && (r <= CUTOFF_RATIO_MAX || last_below),
                format!("sup cutoff mass {}, ratio {r:.4}", fmt_list(&mass)),
            ));
            let err = series_sups(runs, "dirichlet_error");
            let r = ratio_last_first(&err);
            out.push(Verdict::new(
                "A4",
                "dirichlet_comparison",
                decreasing(&err, false, 0.0) && r <= DIRICHLET_RATIO_MAX,
                format!("sup Dirichlet error {}, ratio {r:.4}", fmt_list(&err)),
            ));
            out.push(hypothesis_verdict(&series_sups(runs, "w_scaled"), "sup lambda^2 <W>"));
        }
        ExperimentKind::E2 => {
            let err = series_sups(runs, "err");
            let r = ratio_last_first(&err);
            out.push(Verdict::new(
                "A5",
                "effective_dynamics",
                decreasing(&err, true, 0.0) && r <= EFFECTIVE_RATIO_MAX,
                format!("sup err {}, ratio {r:.4}", fmt_list(&err)),
            ));

            let q_ratio = series_sups(runs, "q_ratio");
            let q0: Vec<f64> = runs.iter().map(|s| s.value("q0").unwrap_or(f64::NAN)).collect();
            let k0 = cfg.state.k0;
            let w = cfg.state.w_s;
            let q_ref = k0 * k0 + 1.0 / (4.0 * w * w) + 1.0;
            let q0_ok = q0.iter().all(|q| ((q - q_ref) / q_ref).abs() <= Q0_REL_TOL);
            out.push(Verdict::new(
                "A6",
                "energy_transfer",
                spread(&q_ratio) < SPREAD_MAX && q0_ok,
                format!(
                    "sup q/q0 {} (spread {:.4}), q0 {} against {q_ref}",
                    fmt_list(&q_ratio),
                    spread(&q_ratio),
                    fmt_list(&q0)
                ),
            ));

            let y2 = series_sups(runs, "y2");
            let n2 = series_sups(runs, "n2");
            let dy = series_sups(runs, "dy_norm2");
            let dx = series_sups(runs, "dx_norm_scaled");
            let tail = runs.last().and_then(|s| s.sup("tail_f3")).unwrap_or(f64::NAN);
            out.push(Verdict::new(
                "A7",
                "state_diagnostics",
                spread(&y2) < SPREAD_MAX
                    && spread(&dy) < SPREAD_MAX
                    && decreasing(&dx, false, 0.0)
                    && tail <= TAIL_MASS_MAX,
                format!(
                    "sup <y^2> {} (spread {:.4}; <n^2> {}), sup |D_y psi|^2 {} (spread {:.4}), \
                     sup |D_s psi|/lambda {}, tail mass at lambda_max {tail:.4e}",
                    fmt_list(&y2),
                    spread(&y2),
                    fmt_list(&n2),
                    fmt_list(&dy),
                    spread(&dy),
                    fmt_list(&dx)
                ),
            ));
            let hyp: Vec<f64> = runs
                .iter()
                .map(|s| s.value("hypothesis").unwrap_or(f64::NAN))
                .collect();
            out.push(hypothesis_verdict(&hyp, "|L psi0|/lambda^2"));
        }
        ExperimentKind::Validate => {}
    }
    out
}
