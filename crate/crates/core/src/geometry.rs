//! Closed plane curves in arclength parameterization and the tube around them.
//!
//! Every curve is described by an analytic parameterization `θ ↦ γ(θ)`,
//! `θ ∈ [0, 2π)`, and reparameterized by arclength through a cumulative
//! Gauss–Legendre table. The normal is the tangent rotated by +90°, so a
//! counter-clockwise curve has an inward normal and positive curvature, and
//! the tangential metric coefficient in tube coordinates is `a = 1 − κ n`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Minimum size of the internal arclength table.
pub const MIN_SAMPLES: usize = 256;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

// 8-point Gauss–Legendre rule on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Circle,
    Ellipse,
    PerturbedCircle,
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Circle => "circle",
            CurveKind::Ellipse => "ellipse",
            CurveKind::PerturbedCircle => "perturbed_circle",
        }
    }
}

impl std::str::FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(CurveKind::Circle),
            "ellipse" => Ok(CurveKind::Ellipse),
            "perturbed_circle" => Ok(CurveKind::PerturbedCircle),
            other => Err(Error::InvalidCurve(format!("unknown curve kind `{other}`"))),
        }
    }
}

/// Analytic parameterization `θ ↦ γ(θ)` together with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Perturbed { radius: f64, amp: f64, mode: f64 },
}

impl Shape {
    /// Returns (γ, γ', γ'').
    fn eval(&self, theta: f64) -> (Point, Point, Point) {
        let (sin, cos) = theta.sin_cos();
        match *self {
            Shape::Circle { radius } => (
                [radius * cos, radius * sin],
                [-radius * sin, radius * cos],
                [-radius * cos, -radius * sin],
            ),
            Shape::Ellipse { a, b } => ([a * cos, b * sin], [-a * sin, b * cos], [-a * cos, -b * sin]),
            Shape::Perturbed { radius, amp, mode } => {
                let (msin, mcos) = (mode * theta).sin_cos();
                let r = radius * (1.0 + amp * mcos);
                let dr = -radius * amp * mode * msin;
                let ddr = -radius * amp * mode * mode * mcos;
                (
                    [r * cos, r * sin],
                    [dr * cos - r * sin, dr * sin + r * cos],
                    [
                        ddr * cos - 2.0 * dr * sin - r * cos,
                        ddr * sin + 2.0 * dr * cos - r * sin,
                    ],
                )
            }
        }
    }

    fn speed(&self, theta: f64) -> f64 {
        let (_, d, _) = self.eval(theta);
        d[0].hypot(d[1])
    }

    /// Arclength between θ₀ and θ₁ (8-point Gauss–Legendre).
    fn arclength(&self, theta0: f64, theta1: f64) -> f64 {
        let half = 0.5 * (theta1 - theta0);
        let mid = 0.5 * (theta1 + theta0);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(|(x, w)| w * self.speed(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// An arclength-parameterized closed plane curve.
#[derive(Debug, Clone)]
pub struct Curve {
    kind: CurveKind,
    params: Vec<f64>,
    shape: Shape,
    length: f64,
    sample_count: usize,
    /// Cumulative arclength at θ_j = 2π j / sample_count, with a closing entry equal to `length`.
    cumulative: Vec<f64>,
    /// Positions at the uniform arclength samples s_i = i·L/N.
    table: Vec<Point>,
    max_abs_curvature: f64,
}

impl Curve {
    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Total arclength L_S.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.max_abs_curvature
    }

    /// Largest distance of the curve from the origin.
    pub fn max_radius(&self) -> f64 {
        self.table
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0, f64::max)
    }

    /// Arclength spacing of the internal sample table.
    pub fn sample_spacing(&self) -> f64 {
        self.length / self.sample_count as f64
    }

    /// Reduces `s` to `[0, L_S)`.
    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.length);
        if w >= self.length {
            0.0
        } else {
            w
        }
    }

    /// Parameter value θ with arclength(0, θ) = s.
    fn theta_of(&self, s: f64) -> f64 {
        let s = self.wrap(s);
        if let Shape::Circle { radius } = self.shape {
            return s / radius;
        }
        let n = self.sample_count;
        let step = TAU / n as f64;
        // cumulative is strictly increasing; locate the bracketing interval
        let j = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).expect("finite arclength"))
        {
            Ok(j) => return j as f64 * step,
            Err(j) => j - 1,
        };
        let theta_j = j as f64 * step;
        let s_j = self.cumulative[j];
        let frac = (s - s_j) / (self.cumulative[j + 1] - s_j);
        let mut theta = theta_j + frac * step;
        for _ in 0..8 {
            let f = s_j + self.shape.arclength(theta_j, theta) - s;
            let d = f / self.shape.speed(theta);
            theta -= d;
            if d.abs() < 1e-15 {
                break;
            }
        }
        theta
    }

    pub fn position(&self, s: f64) -> Point {
        self.shape.eval(self.theta_of(s)).0
    }

    pub fn tangent(&self, s: f64) -> Point {
        let (_, d, _) = self.shape.eval(self.theta_of(s));
        let speed = d[0].hypot(d[1]);
        [d[0] / speed, d[1] / speed]
    }

    /// Tangent rotated by +90°.
    pub fn normal(&self, s: f64) -> Point {
        let t = self.tangent(s);
        [-t[1], t[0]]
    }

    /// Signed curvature, positive where the curve turns towards `normal`.
    pub fn curvature(&self, s: f64) -> f64 {
        curvature_at(&self.shape, self.theta_of(s))
    }

    /// dκ/ds by central differences.
    pub fn curvature_derivative(&self, s: f64) -> f64 {
        if matches!(self.shape, Shape::Circle { .. }) {
            return 0.0;
        }
        let h = 1e-3 * self.length / TAU;
        (self.curvature(s + h) - self.curvature(s - h)) / (2.0 * h)
    }

    /// d²κ/ds² by central differences.
    pub fn curvature_second_derivative(&self, s: f64) -> f64 {
        if matches!(self.shape, Shape::Circle { .. }) {
            return 0.0;
        }
        let h = 2e-3 * self.length / TAU;
        (self.curvature(s + h) - 2.0 * self.curvature(s) + self.curvature(s - h)) / (h * h)
    }

    /// Arclength positions of the internal sample table.
    pub fn sample_arclengths(&self) -> impl Iterator<Item = f64> + '_ {
        let ds = self.sample_spacing();
        (0..self.sample_count).map(move |i| i as f64 * ds)
    }
}

fn curvature_at(shape: &Shape, theta: f64) -> f64 {
    let (_, d, dd) = shape.eval(theta);
    let speed = d[0].hypot(d[1]);
    (d[0] * dd[1] - d[1] * dd[0]) / (speed * speed * speed)
}

/// Builds an arclength-parameterized curve.
///
/// `params` are `[R]` for a circle, `[a, b]` (a ≥ b) for an ellipse and
/// `[R, amplitude, mode]` for the polar curve `r(θ) = R(1 + amplitude·cos(mode·θ))`.
pub fn make_curve(kind: CurveKind, params: &[f64], sample_count: usize) -> Result<Curve> {
    if sample_count < MIN_SAMPLES {
        return Err(Error::InvalidCurve(format!(
            "sample_count {sample_count} is below the minimum {MIN_SAMPLES}"
        )));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidCurve("non-finite parameter".into()));
    }
    let expect = |n: usize| -> Result<()> {
        if params.len() != n {
            Err(Error::InvalidCurve(format!(
                "{} takes {n} parameters, got {}",
                kind.name(),
                params.len()
            )))
        } else {
            Ok(())
        }
    };
    let shape = match kind {
        CurveKind::Circle => {
            expect(1)?;
            if params[0] <= 0.0 {
                return Err(Error::InvalidCurve("radius must be positive".into()));
            }
            Shape::Circle { radius: params[0] }
        }
        CurveKind::Ellipse => {
            expect(2)?;
            let (a, b) = (params[0], params[1]);
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::InvalidCurve("semi-axes must be positive".into()));
            }
            if a < b {
                return Err(Error::InvalidCurve(
                    "ellipse requires a >= b (major axis along x)".into(),
                ));
            }
            Shape::Ellipse { a, b }
        }
        CurveKind::PerturbedCircle => {
            expect(3)?;
            let (radius, amp, mode) = (params[0], params[1], params[2]);
            if radius <= 0.0 {
                return Err(Error::InvalidCurve("radius must be positive".into()));
            }
            if !(0.0..1.0).contains(&amp) {
                return Err(Error::InvalidCurve(
                    "perturbation amplitude must lie in [0, 1) so that r(θ) > 0".into(),
                ));
            }
            if mode < 0.0 || mode.fract() != 0.0 {
                return Err(Error::InvalidCurve(
                    "mode number must be a non-negative integer".into(),
                ));
            }
            Shape::Perturbed { radius, amp, mode }
        }
    };

    let step = TAU / sample_count as f64;
    let mut cumulative = Vec::with_capacity(sample_count + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for j in 0..sample_count {
        acc += shape.arclength(j as f64 * step, (j + 1) as f64 * step);
        cumulative.push(acc);
    }
    let length = acc;

    let mut curve = Curve {
        kind,
        params: params.to_vec(),
        shape,
        length,
        sample_count,
        cumulative,
        table: Vec::new(),
        max_abs_curvature: 0.0,
    };
    let ds = length / sample_count as f64;
    let mut table = Vec::with_capacity(sample_count);
    let mut kmax = 0.0f64;
    for i in 0..sample_count {
        let theta = curve.theta_of(i as f64 * ds);
        table.push(shape.eval(theta).0);
        kmax = kmax.max(curvature_at(&shape, theta).abs());
        // catch extrema between samples
        kmax = kmax.max(curvature_at(&shape, (i as f64 + 0.5) * step).abs());
    }
    if !kmax.is_finite() {
        return Err(Error::InvalidCurve("curvature is not finite".into()));
    }
    curve.table = table;
    curve.max_abs_curvature = kmax;
    Ok(curve)
}

/// Half-width and cutoff radius of the tube N S_δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeParams {
    pub delta: f64,
    pub epsilon: f64,
    pub a_min: f64,
}

impl TubeParams {
    pub const DEFAULT_A_MIN: f64 = 0.5;

    pub fn new(delta: f64, epsilon: f64, a_min: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidTube(format!("delta = {delta} must be positive")));
        }
        if !(epsilon > 0.0 && epsilon < delta) {
            return Err(Error::InvalidTube(format!(
                "epsilon = {epsilon} must satisfy 0 < epsilon < delta = {delta}"
            )));
        }
        if !(a_min > 0.0 && a_min < 1.0) {
            return Err(Error::InvalidTube(format!("a_min = {a_min} must lie in (0, 1)")));
        }
        Ok(Self { delta, epsilon, a_min })
    }

    /// Checks that the tubular map is injective on |n| < δ for this curve.
    pub fn check_against(&self, curve: &Curve) -> Result<()> {
        let kmax = curve.max_abs_curvature();
        if self.delta * kmax >= 1.0 {
            return Err(Error::InvalidTube(format!(
                "delta = {} must be below the reach 1/max|κ| = {}",
                self.delta,
                1.0 / kmax
            )));
        }
        Ok(())
    }
}

/// `position(s) + n·normal(s)`.
pub fn tubular_map(curve: &Curve, s: f64, n: f64) -> Point {
    let theta = curve.theta_of(s);
    let (p, d, _) = curve.shape.eval(theta);
    let speed = d[0].hypot(d[1]);
    [p[0] - n * d[1] / speed, p[1] + n * d[0] / speed]
}

/// Nearest point on the curve: `(d(x, S), s*)` with `s* ∈ [0, L_S)`.
///
/// Coarse scan of the sample table, then golden-section refinement on the two
/// neighbouring sample intervals. Ties go to the smallest sample arclength.
pub fn distance_to_curve(curve: &Curve, x: Point) -> (f64, f64) {
    let dist2 = |p: &Point| (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
    let mut best = f64::INFINITY;
    for p in &curve.table {
        best = best.min(dist2(p));
    }
    let slack = 1e-12 * best.max(1.0);
    let i0 = curve
        .table
        .iter()
        .position(|p| dist2(p) <= best + slack)
        .unwrap_or(0);

    let ds = curve.sample_spacing();
    let s_coarse = i0 as f64 * ds;
    let f_coarse = dist2(&curve.table[i0]);
    let f = |s: f64| dist2(&curve.position(s));

    let (mut lo, mut hi) = (s_coarse - ds, s_coarse + ds);
    let mut c = hi - GOLDEN * (hi - lo);
    let mut d = lo + GOLDEN * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > 1e-12 * curve.length() {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - GOLDEN * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + GOLDEN * (hi - lo);
            fd = f(d);
        }
    }
    // Newton on the tangential residual (γ(s) − x)·T(s) sharpens the bracket
    let mut s_ref = 0.5 * (lo + hi);
    for _ in 0..4 {
        let p = curve.position(s_ref);
        let (t, nv) = (curve.tangent(s_ref), curve.normal(s_ref));
        let r = [p[0] - x[0], p[1] - x[1]];
        let g = r[0] * t[0] + r[1] * t[1];
        let gp = 1.0 + curve.curvature(s_ref) * (r[0] * nv[0] + r[1] * nv[1]);
        if gp.abs() < 1e-9 || (g / gp).abs() > ds {
            break;
        }
        s_ref -= g / gp;
    }
    let f_ref = f(s_ref);
    if f_ref < f_coarse - 1e-15 * f_coarse.max(1e-300) {
        (f_ref.sqrt(), curve.wrap(s_ref))
    } else {
        (f_coarse.sqrt(), s_coarse)
    }
}

/// Signed normal coordinate of `x` relative to its nearest point, i.e. the
/// `n` with `x = tubular_map(s*, n)` when x lies in the tube.
pub fn normal_coordinate(curve: &Curve, x: Point) -> (f64, f64, f64) {
    let (d, s) = distance_to_curve(curve, x);
    let p = curve.position(s);
    let nv = curve.normal(s);
    let n = (x[0] - p[0]) * nv[0] + (x[1] - p[1]) * nv[1];
    (d, s, n)
}

/// Tangential metric factor `a = max(1 − κ(s)·n, a_min)`.
pub fn metric_factor(curve: &Curve, s: f64, n: f64, a_min: f64) -> f64 {
    (1.0 - curve.curvature(s) * n).max(a_min)
}
