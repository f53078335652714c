//! Flat `key=value` experiment configuration with dotted section names.
//!
//! ```text
//! # E2 sweep
//! experiment = e2
//! curve.kind = circle
//! lambdas = [4, 8, 16]
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::DEFAULT_NOISE_FLOOR;
use crate::error::{Error, Result};
use crate::geometry::{make_curve, Curve, CurveKind, TubeParams};
use crate::operators::ConfinementProfile;
use crate::propagation::StateParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    E1,
    E2,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::E1 => "e1",
            ExperimentKind::E2 => "e2",
            ExperimentKind::Validate => "validate",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e1" => Ok(Self::E1),
            "e2" => Ok(Self::E2),
            "validate" => Ok(Self::Validate),
            other => Err(Error::Config {
                key: "experiment".into(),
                reason: format!("expected e1, e2 or validate, got `{other}`"),
            }),
        }
    }
}

/// Time step per λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    /// dt = c/λ².
    InverseSquare(f64),
    Fixed(f64),
}

impl DtRule {
    pub fn dt(self, lambda: f64) -> f64 {
        match self {
            DtRule::InverseSquare(c) => c / (lambda * lambda),
            DtRule::Fixed(dt) => dt,
        }
    }
}

impl fmt::Display for DtRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtRule::InverseSquare(c) => write!(f, "{c}/lambda^2"),
            DtRule::Fixed(dt) => write!(f, "{dt}"),
        }
    }
}

impl FromStr for DtRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Config {
            key: "dt_rule".into(),
            reason: format!("{reason}: `{s}`"),
        };
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let value = if let Some(c) = compact.strip_suffix("/lambda^2") {
            DtRule::InverseSquare(c.parse().map_err(|_| bad("bad coefficient"))?)
        } else {
            DtRule::Fixed(compact.parse().map_err(|_| bad("expected `c/lambda^2` or a number"))?)
        };
        match value {
            DtRule::InverseSquare(c) | DtRule::Fixed(c) if !(c > 0.0 && c.is_finite()) => {
                Err(bad("must be positive"))
            }
            v => Ok(v),
        }
    }
}

/// Point count along one grid axis: the smallest resolving count, or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountRule {
    Auto,
    Fixed(usize),
}

impl fmt::Display for CountRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountRule::Auto => write!(f, "auto"),
            CountRule::Fixed(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Half width of the E1 box; `None` means `max radius + 1`.
    pub box_half: Option<f64>,
    pub box_count: CountRule,
    pub s_count: usize,
    /// Half width of the E2 `y` axis; `None` means `8/√ω`.
    pub y_max: Option<f64>,
    pub y_count: CountRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub curve_kind: CurveKind,
    pub curve_params: Vec<f64>,
    pub curve_samples: usize,
    pub profile: ConfinementProfile,
    pub tube: TubeParams,
    pub lambdas: Vec<f64>,
    pub t_final: f64,
    pub dt_rule: DtRule,
    pub grid: GridSpec,
    pub state: StateParams,
    pub s_exp: f64,
    pub output_dir: PathBuf,
    pub noise_floor: f64,
    pub solver_tol: f64,
    pub max_solver_iters: usize,
    pub time_reversal: bool,
}

const KEYS: &[&str] = &[
    "experiment",
    "curve.kind",
    "curve.params",
    "curve.samples",
    "profile.omega",
    "profile.v0",
    "tube.delta",
    "tube.epsilon",
    "tube.a_min",
    "lambdas",
    "T",
    "dt_rule",
    "grid.box_half",
    "grid.box_count",
    "grid.s_count",
    "grid.y_max",
    "grid.y_count",
    "state.k0",
    "state.w_s",
    "state.s0",
    "s_exp",
    "output_dir",
    "noise_floor",
    "solver.tol",
    "solver.max_iters",
    "checks.time_reversal",
];

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    let inner = raw.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| config_err(key, format!("`{s}` is not a number"))))
        .collect()
}

fn parse_count(key: &str, raw: &str) -> Result<CountRule> {
    if raw == "auto" {
        return Ok(CountRule::Auto);
    }
    raw.parse::<usize>()
        .map(CountRule::Fixed)
        .map_err(|_| config_err(key, format!("expected a count or `auto`, got `{raw}`")))
}

fn format_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
    format!("[{}]", items.join(", "))
}

/// Raw key/value pairs from the text, in file order.
fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(config_err(key, "unknown key"));
        }
        if pairs.insert(key.to_string(), value.to_string()).is_some() {
            return Err(config_err(key, "given more than once"));
        }
    }
    Ok(pairs)
}

impl ExperimentConfig {
    /// Parses and validates configuration text; missing keys take defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let get = |k: &str| pairs.get(k).map(String::as_str);
        let num = |k: &str, default: f64| -> Result<f64> {
            match get(k) {
                None => Ok(default),
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| config_err(k, format!("`{v}` is not a finite number"))),
            }
        };
        let int = |k: &str, default: usize| -> Result<usize> {
            match get(k) {
                None => Ok(default),
                Some(v) => v
                    .parse::<usize>()
                    .map_err(|_| config_err(k, format!("`{v}` is not a non-negative integer"))),
            }
        };

        let experiment: ExperimentKind = get("experiment")
            .ok_or_else(|| config_err("experiment", "required"))?
            .parse()?;
        let curve_kind: CurveKind = get("curve.kind")
            .unwrap_or("circle")
            .parse()
            .map_err(|e: Error| config_err("curve.kind", e.to_string()))?;
        let curve_params = match get("curve.params") {
            Some(v) => parse_list("curve.params", v)?,
            None => match curve_kind {
                CurveKind::Circle => vec![1.0],
                CurveKind::Ellipse => vec![1.5, 1.0],
                CurveKind::PerturbedCircle => vec![1.0, 0.1, 3.0],
            },
        };
        let curve_samples = int("curve.samples", 2048)?;

        let profile = ConfinementProfile::new(num("profile.omega", 1.0)?, num("profile.v0", 0.5)?)
            .map_err(|e| config_err("profile", e.to_string()))?;
        let (delta, epsilon, a_min) = (
            num("tube.delta", 0.5)?,
            num("tube.epsilon", 0.25)?,
            num("tube.a_min", 0.5)?,
        );
        if epsilon >= delta {
            return Err(config_err(
                "tube.epsilon",
                format!("epsilon = {epsilon} must be below delta = {delta}"),
            ));
        }
        let tube = TubeParams::new(delta, epsilon, a_min).map_err(|e| config_err("tube", e.to_string()))?;

        let lambdas = match get("lambdas") {
            Some(v) => parse_list("lambdas", v)?,
            None if experiment == ExperimentKind::Validate => Vec::new(),
            None => return Err(config_err("lambdas", "required")),
        };
        if experiment != ExperimentKind::Validate {
            if lambdas.len() < 3 {
                return Err(config_err(
                    "lambdas",
                    format!("need at least 3 values, got {}", lambdas.len()),
                ));
            }
            if lambdas.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_err("lambdas", "values must be strictly increasing"));
            }
            if lambdas[0] < 1.0 {
                return Err(config_err("lambdas", "values must be at least 1"));
            }
        }

        let t_final = num("T", 1.0)?;
        if t_final <= 0.0 {
            return Err(config_err("T", "must be positive"));
        }
        let dt_rule: DtRule = get("dt_rule").unwrap_or("0.02/lambda^2").parse()?;
        for &l in &lambdas {
            if dt_rule.dt(l) > t_final {
                return Err(config_err("dt_rule", format!("dt at lambda = {l} exceeds T")));
            }
        }

        let opt_pos = |k: &str| -> Result<Option<f64>> {
            match get(k) {
                None | Some("auto") => Ok(None),
                Some(_) => {
                    let v = num(k, 0.0)?;
                    if v <= 0.0 {
                        return Err(config_err(k, "must be positive"));
                    }
                    Ok(Some(v))
                }
            }
        };
        let grid = GridSpec {
            box_half: opt_pos("grid.box_half")?,
            box_count: parse_count("grid.box_count", get("grid.box_count").unwrap_or("auto"))?,
            s_count: int("grid.s_count", 128)?,
            y_max: opt_pos("grid.y_max")?,
            y_count: parse_count("grid.y_count", get("grid.y_count").unwrap_or("auto"))?,
        };

        let state = StateParams::new(num("state.k0", 2.0)?, num("state.w_s", 0.5)?, num("state.s0", 0.0)?)
            .map_err(|e| config_err("state", e.to_string()))?;
        let s_exp = num("s_exp", 0.5)?;
        if !(s_exp > 0.0 && s_exp < 1.0) {
            return Err(config_err("s_exp", "must lie in (0, 1)"));
        }
        let noise_floor = num("noise_floor", DEFAULT_NOISE_FLOOR)?;
        if noise_floor < 0.0 {
            return Err(config_err("noise_floor", "must be non-negative"));
        }
        let solver_tol = num("solver.tol", 1e-12)?;
        if !(solver_tol > 0.0 && solver_tol < 1.0) {
            return Err(config_err("solver.tol", "must lie in (0, 1)"));
        }
        let max_solver_iters = int("solver.max_iters", 10_000)?;
        if max_solver_iters == 0 {
            return Err(config_err("solver.max_iters", "must be positive"));
        }
        let time_reversal = match get("checks.time_reversal").unwrap_or("true") {
            "true" => true,
            "false" => false,
            other => return Err(config_err("checks.time_reversal", format!("expected true or false, got `{other}`"))),
        };

        let cfg = Self {
            experiment,
            curve_kind,
            curve_params,
            curve_samples,
            profile,
            tube,
            lambdas,
            t_final,
            dt_rule,
            grid,
            state,
            s_exp,
            output_dir: PathBuf::from(get("output_dir").unwrap_or("out")),
            noise_floor,
            solver_tol,
            max_solver_iters,
            time_reversal,
        };
        // curve-dependent invariants: δ below the reach
        let curve = cfg.curve()?;
        cfg.tube
            .check_against(&curve)
            .map_err(|e| config_err("tube.delta", e.to_string()))?;
        Ok(cfg)
    }

    pub fn curve(&self) -> Result<Curve> {
        make_curve(self.curve_kind, &self.curve_params, self.curve_samples)
            .map_err(|e| config_err("curve", e.to_string()))
    }

    /// Effective values of every key, defaults included.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("experiment", self.experiment.name().into());
        put("curve.kind", self.curve_kind.name().into());
        put("curve.params", format_list(&self.curve_params));
        put("curve.samples", self.curve_samples.to_string());
        put("profile.omega", self.profile.omega.to_string());
        put("profile.v0", self.profile.v0.to_string());
        put("tube.delta", self.tube.delta.to_string());
        put("tube.epsilon", self.tube.epsilon.to_string());
        put("tube.a_min", self.tube.a_min.to_string());
        put("lambdas", format_list(&self.lambdas));
        put("T", self.t_final.to_string());
        put("dt_rule", self.dt_rule.to_string());
        put(
            "grid.box_half",
            self.grid.box_half.map_or("auto".into(), |v| v.to_string()),
        );
        put("grid.box_count", self.grid.box_count.to_string());
        put("grid.s_count", self.grid.s_count.to_string());
        put("grid.y_max", self.grid.y_max.map_or("auto".into(), |v| v.to_string()));
        put("grid.y_count", self.grid.y_count.to_string());
        put("state.k0", self.state.k0.to_string());
        put("state.w_s", self.state.w_s.to_string());
        put("state.s0", self.state.s0.to_string());
        put("s_exp", self.s_exp.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("noise_floor", self.noise_floor.to_string());
        put("solver.tol", self.solver_tol.to_string());
        put("solver.max_iters", self.max_solver_iters.to_string());
        put("checks.time_reversal", self.time_reversal.to_string());
        m
    }

    /// Canonical `key=value` text of the effective configuration.
    pub fn canonical_text(&self) -> String {
        self.echo()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 of the canonical text, hex encoded. The output directory is
    /// excluded so relocated runs hash alike.
    pub fn hash(&self) -> String {
        let mut echo = self.echo();
        echo.remove("output_dir");
        let text: String = echo.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::parse(&text)
}
