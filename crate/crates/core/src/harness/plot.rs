//! Deterministic SVG figures from stored trajectories: the rate plot and
//! per-series traces for every λ.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::persist::{load_runs, noise_floor_for, rates_for};
use super::ExperimentKind;
use crate::diagnostics::TrajectoryRecord;
use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const MAX_TRACE_POINTS: usize = 800;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotReport {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn trace_series(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::E1 => &["cutoff_mass", "dirichlet_error", "w_scaled", "grad_norm2", "energy"],
        ExperimentKind::E2 => &["q", "q_ratio", "err", "y2", "dy_norm2", "dx_norm_scaled", "tail_f3"],
        ExperimentKind::Validate => &[],
    }
}

struct Line {
    label: String,
    points: Vec<(f64, f64)>,
    markers: bool,
    dashed: bool,
    color: &'static str,
}

struct Figure {
    title: String,
    x_label: String,
    y_label: String,
    log: bool,
    x_ticks: Option<Vec<f64>>,
    lines: Vec<Line>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn padded(lo: f64, hi: f64, log: bool) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if log { 0.5 } else { lo.abs().max(1.0) * 0.05 };
        (lo - pad, hi + pad)
    }
}

fn render(fig: &Figure) -> String {
    let tr = |v: f64| if fig.log { v.log10() } else { v };
    let usable = |p: &(f64, f64)| p.0.is_finite() && p.1.is_finite() && (!fig.log || (p.0 > 0.0 && p.1 > 0.0));
    let pts = fig.lines.iter().flat_map(|l| l.points.iter().filter(|p| usable(p)));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(tr(x));
        x1 = x1.max(tr(x));
        y0 = y0.min(tr(y));
        y1 = y1.max(tr(y));
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = padded(x0, x1, fig.log);
    let (y0, y1) = padded(y0, y1, fig.log);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + ph - (v - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&fig.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    // ticks: given x values, decades on log axes, five even steps otherwise
    let even = |lo: f64, hi: f64| (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect::<Vec<_>>();
    let decades = |lo: f64, hi: f64| {
        let d: Vec<f64> = (lo.ceil() as i64..=hi.floor() as i64).map(|e| e as f64).collect();
        if d.len() >= 2 {
            d
        } else {
            even(lo, hi)
        }
    };
    let x_ticks: Vec<f64> = match &fig.x_ticks {
        Some(t) => t.iter().map(|&v| tr(v)).collect(),
        None if fig.log => decades(x0, x1),
        None => even(x0, x1),
    };
    let y_ticks = if fig.log { decades(y0, y1) } else { even(y0, y1) };
    let untr = |v: f64| if fig.log { 10f64.powf(v) } else { v };
    for v in x_ticks {
        let x = sx(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#999" stroke-width="0.5"/>"##,
            TOP,
            TOP + ph
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 16.0,
            tick_label(untr(v))
        );
    }
    for v in y_ticks {
        let y = sy(v);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999" stroke-width="0.5"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick_label(untr(v))
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(&fig.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&fig.y_label)
    );

    for (i, line) in fig.lines.iter().enumerate() {
        let pts: Vec<(f64, f64)> = line
            .points
            .iter()
            .filter(|p| usable(p))
            .map(|&(x, y)| (sx(tr(x)), sy(tr(y))))
            .collect();
        if pts.len() >= 2 || (!line.markers && !pts.is_empty()) {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                path.join(" "),
                line.color
            );
        }
        if line.markers {
            for (x, y) in &pts {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{}"/>"#, line.color);
            }
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            line.color
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#,
            lx + 24.0,
            escape(&line.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn thin(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let n = times.len();
    let stride = n.div_ceil(MAX_TRACE_POINTS).max(1);
    let mut pts: Vec<(f64, f64)> = (0..n).step_by(stride).map(|k| (times[k], values[k])).collect();
    if n > 0 && !(n - 1).is_multiple_of(stride) {
        pts.push((times[n - 1], values[n - 1]));
    }
    pts
}

fn write_figure(dir: &Path, name: &str, fig: &Figure, report: &mut PlotReport) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, render(fig)).map_err(|e| Error::io(&path, e))?;
    report.files.push(path);
    Ok(())
}

fn rate_figure(kind: ExperimentKind, runs: &[(f64, TrajectoryRecord)], dir: &Path) -> Result<Figure> {
    let rates = rates_for(kind, runs, noise_floor_for(dir), dir)?;
    let mut lines = Vec::new();
    for (i, r) in rates.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        lines.push(Line {
            label: format!("sup {}", r.name),
            points: r.points.clone(),
            markers: true,
            dashed: false,
            color,
        });
        if let Some(fit) = &r.fit {
            let (a, b) = (r.points[0].0, r.points[r.points.len() - 1].0);
            let at = |l: f64| (fit.intercept + fit.slope * l.ln()).exp();
            lines.push(Line {
                label: format!("slope {:.3} (r2 {:.3})", fit.slope, fit.r_squared),
                points: vec![(a, at(a)), (b, at(b))],
                markers: false,
                dashed: true,
                color,
            });
        }
    }
    Ok(Figure {
        title: format!("{}: sup over t against lambda", kind.name()),
        x_label: "lambda".into(),
        y_label: "sup_t".into(),
        log: true,
        x_ticks: Some(runs.iter().map(|r| r.0).collect()),
        lines,
    })
}

/// Writes `<exp>_rate.svg` and `<exp>_trace_<series>.svg` into `dir` from the
/// trajectory CSVs found there. Missing inputs produce warnings, not errors.
pub fn emit_plots(dir: &Path) -> Result<PlotReport> {
    let mut report = PlotReport::default();
    let Some((kind, runs)) = load_runs(dir)? else {
        report
            .warnings
            .push(format!("{}: no trajectory files, no plots written", dir.display()));
        return Ok(report);
    };
    let rate = rate_figure(kind, &runs, dir)?;
    write_figure(dir, &format!("{}_rate.svg", kind.name()), &rate, &mut report)?;

    for name in trace_series(kind) {
        if let Some((lambda, _)) = runs.iter().find(|(_, r)| r.series(name).is_none()) {
            report
                .warnings
                .push(format!("series `{name}` missing at lambda = {lambda}; trace plot skipped"));
            continue;
        }
        let lines = runs
            .iter()
            .enumerate()
            .map(|(i, (lambda, rec))| Line {
                label: format!("lambda = {lambda}"),
                points: thin(rec.times(), rec.series(name).expect("checked")),
                markers: false,
                dashed: false,
                color: COLORS[i % COLORS.len()],
            })
            .collect();
        let fig = Figure {
            title: format!("{}: {name}", kind.name()),
            x_label: "t".into(),
            y_label: name.to_string(),
            log: false,
            x_ticks: None,
            lines,
        };
        write_figure(dir, &format!("{}_trace_{name}.svg", kind.name()), &fig, &mut report)?;
    }
    Ok(report)
}
