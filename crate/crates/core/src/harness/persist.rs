//! Trajectory CSVs and rate fits recomputed from them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{fit_targets, ExperimentKind, RateSeries, RunManifest};
use crate::diagnostics::{TrajectoryRecord, DEFAULT_NOISE_FLOOR};
use crate::error::{Error, Result};

/// `<experiment>_lambda_<λ>.csv`.
pub fn csv_file_name(kind: ExperimentKind, lambda: f64) -> String {
    format!("{}_lambda_{lambda}.csv", kind.name())
}

fn parse_file_name(name: &str) -> Option<(ExperimentKind, f64)> {
    let stem = name.strip_suffix(".csv")?;
    let (kind, lambda) = stem.split_once("_lambda_")?;
    let kind = match kind {
        "e1" => ExperimentKind::E1,
        "e2" => ExperimentKind::E2,
        _ => return None,
    };
    Some((kind, lambda.parse().ok()?))
}

/// Writes `t,<series...>` with 17 significant digits per value.
pub fn write_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Data {
            path: path.into(),
            reason: format!("{other:?}"),
        },
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["t".to_string()];
    header.extend(record.names().iter().cloned());
    w.write_record(&header).map_err(io)?;
    let mut row = Vec::with_capacity(header.len());
    for (k, t) in record.times().iter().enumerate() {
        row.clear();
        row.push(format!("{t:.16e}"));
        row.extend(record.row(k).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<TrajectoryRecord> {
    let bad = |reason: String| Error::Data {
        path: path.into(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => bad(format!("{other:?}")),
    })?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.get(0) != Some("t") {
        return Err(bad("first column must be `t`".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut record = TrajectoryRecord::new(names).map_err(|e| bad(e.to_string()))?;
    let mut row = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        row.clear();
        for field in rec.iter() {
            row.push(
                field
                    .parse::<f64>()
                    .map_err(|_| bad(format!("row {}: `{field}` is not a number", line + 1)))?,
            );
        }
        record
            .push(row[0], &row[1..])
            .map_err(|e| bad(format!("row {}: {e}", line + 1)))?;
    }
    Ok(record)
}

/// Trajectories keyed by λ.
pub type Runs = Vec<(f64, TrajectoryRecord)>;

/// Trajectory files of one experiment in `dir`, sorted by λ. Returns `None`
/// when the directory holds none.
pub fn load_runs(dir: &Path) -> Result<Option<(ExperimentKind, Runs)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<(ExperimentKind, f64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if let Some((kind, lambda)) = path.file_name().and_then(|n| n.to_str()).and_then(parse_file_name) {
            found.push((kind, lambda, path));
        }
    }
    let Some(kind) = found.first().map(|f| f.0) else {
        return Ok(None);
    };
    if found.iter().any(|f| f.0 != kind) {
        return Err(Error::Data {
            path: dir.into(),
            reason: "trajectory files of several experiments".into(),
        });
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    let runs = found
        .into_iter()
        .map(|(_, lambda, path)| Ok((lambda, read_csv(&path)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some((kind, runs)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitReport {
    pub experiment: ExperimentKind,
    pub noise_floor: f64,
    pub rates: Vec<RateSeries>,
}

/// Noise floor recorded in `dir/manifest.json`, or the default.
pub(super) fn noise_floor_for(dir: &Path) -> f64 {
    RunManifest::read(dir)
        .ok()
        .and_then(|m| m.config.get("noise_floor").and_then(|v| v.parse().ok()))
        .unwrap_or(DEFAULT_NOISE_FLOOR)
}

/// Fits of sup_t of every fit target against λ.
pub(super) fn rates_for(
    kind: ExperimentKind,
    runs: &[(f64, TrajectoryRecord)],
    floor: f64,
    dir: &Path,
) -> Result<Vec<RateSeries>> {
    let mut rates = Vec::new();
    for name in fit_targets(kind) {
        let mut points = Vec::with_capacity(runs.len());
        for (lambda, record) in runs {
            let sup = record.sup(name).ok_or_else(|| Error::Data {
                path: dir.join(csv_file_name(kind, *lambda)),
                reason: format!("missing series `{name}`"),
            })?;
            points.push((*lambda, sup));
        }
        rates.push(RateSeries::new(name, points, floor));
    }
    Ok(rates)
}

/// Recomputes the rate fits from the CSVs in `dir`. The noise floor comes
/// from `manifest.json` when present.
pub fn refit_dir(dir: &Path) -> Result<RefitReport> {
    let (kind, runs) = load_runs(dir)?.ok_or_else(|| Error::Data {
        path: dir.into(),
        reason: "no trajectory files".into(),
    })?;
    let noise_floor = noise_floor_for(dir);
    Ok(RefitReport {
        experiment: kind,
        noise_floor,
        rates: rates_for(kind, &runs, noise_floor, dir)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = TrajectoryRecord::new(vec!["norm".into(), "energy".into()]).unwrap();
        rec.push(0.0, &[1.0, 0.1 + 0.2]).unwrap();
        rec.push(1.0 / 3.0, &[1.0 - 1e-15, std::f64::consts::PI]).unwrap();
        let path = dir.path().join(csv_file_name(ExperimentKind::E2, 4.0));
        write_csv(&path, &rec).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,norm,energy\n0.0000000000000000e0,"));
        let back = read_csv(&path).unwrap();
        assert_eq!(back.times(), rec.times());
        assert_eq!(back.series("energy"), rec.series("energy"));
    }

    #[test]
    fn file_names() {
        assert_eq!(csv_file_name(ExperimentKind::E1, 2.0), "e1_lambda_2.csv");
        assert_eq!(parse_file_name("e2_lambda_16.csv"), Some((ExperimentKind::E2, 16.0)));
        assert_eq!(parse_file_name("e2_lambda_2.5.csv"), Some((ExperimentKind::E2, 2.5)));
        assert_eq!(parse_file_name("manifest.json"), None);
    }

    #[test]
    fn empty_directory_has_no_runs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_runs(dir.path()).unwrap().is_none());
        assert!(matches!(refit_dir(dir.path()), Err(Error::Data { .. })));
    }
}
