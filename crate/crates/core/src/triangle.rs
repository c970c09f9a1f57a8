//! Triangles modulo translation, rotation and scaling.
//!
//! Fixing `v_0 = (1, 0)` and `v_2 = (-1, 0)` leaves the apex `v = v_1` free in
//! the punctured plane `R² \ {(±1, 0)}`. Restricted to perturbations of the
//! apex, `g^m` is conformal to the Euclidean metric with factor `f_m`; closed
//! forms are known for `m ≤ 2` and everything else goes through the general
//! curve machinery.

use rayon::prelude::*;
use serde::Serialize;

use crate::brownian::{Event, Quantiles, DEFAULT_EDGE_FLOOR};
use crate::calculus::{linear_fit, MetricField};
use crate::curve::{self, DiscreteCurve, MetricOrder, TangentVector, EPS_EDGE};
use crate::error::{Error, Result};
use crate::rng::gaussian_block;
use crate::scalar::Real;

pub const LEFT_SINGULARITY: [f64; 2] = [-1.0, 0.0];
pub const RIGHT_SINGULARITY: [f64; 2] = [1.0, 0.0];

/// The apex of a normalized triangle `((1,0), v, (-1,0))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrianglePoint {
    pub x: f64,
    pub y: f64,
}

impl TrianglePoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        let p = Self { x, y };
        if !x.is_finite() || !y.is_finite() || !(p.singularity_distance() > EPS_EDGE) {
            return Err(Error::DomainViolation { x, y });
        }
        Ok(p)
    }

    /// `|e_0| = |v - (1,0)|`.
    pub fn e0_len(&self) -> f64 {
        (self.x - 1.0).hypot(self.y)
    }

    /// `|e_1| = |(-1,0) - v|`.
    pub fn e1_len(&self) -> f64 {
        (self.x + 1.0).hypot(self.y)
    }

    pub fn length(&self) -> f64 {
        self.e0_len() + self.e1_len() + 2.0
    }

    /// Distance to the nearer excluded point.
    pub fn singularity_distance(&self) -> f64 {
        self.e0_len().min(self.e1_len())
    }

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn curve(&self) -> DiscreteCurve {
        DiscreteCurve::from_points(&[RIGHT_SINGULARITY, [self.x, self.y], LEFT_SINGULARITY])
            .expect("apex is away from both fixed vertices")
    }
}

/// `|e_0|^m · f_m` from the two free edge lengths `a = |e_0|`, `b = |e_1|`.
///
/// Multiplying through by `a^m` keeps the value finite as `a → 0`.
pub fn scaled_conformal_factor<S: Real>(m: u32, a: S, b: S) -> Option<S> {
    let one = S::from_f64(1.0);
    let two = S::from_f64(2.0);
    let l = a + b + two;
    let l3 = l * l * l;
    match m {
        0 => Some((a + b) / l3),
        1 => Some(a * (a + b) / (two * l3) + (one + a / b) / l),
        2 => {
            let b2 = b * b;
            let bracket = two / (a + two) + two * (a + b) / b2 + two * a * a / (b2 * (b + two));
            Some(a * a * (a + b) / (two * l3) + bracket * l)
        }
        _ => None,
    }
}

/// `f_m` from the free edge lengths; `None` for `m ≥ 3`.
pub fn conformal_factor_lengths<S: Real>(m: u32, a: S, b: S) -> Option<S> {
    scaled_conformal_factor(m, a, b).map(|s| s / a.powi(m as i32))
}

/// Closed-form conformal factor `f_m(v)` for `m ∈ {0, 1, 2}`.
pub fn conformal_factor(m: MetricOrder, v: &TrianglePoint) -> Result<f64> {
    TrianglePoint::new(v.x, v.y)?;
    conformal_factor_lengths(m.get(), v.e0_len(), v.e1_len())
        .ok_or_else(|| Error::InvalidConfig(format!("no closed-form conformal factor for m = {m}")))
}

/// `g^m((0,h,0), (0,h,0))` evaluated by the general curve code on the triangle
/// `((1,0), v, (-1,0))`.
pub fn restricted_metric_oracle(m: MetricOrder, v: &TrianglePoint, h: [f64; 2]) -> Result<f64> {
    TrianglePoint::new(v.x, v.y)?;
    restricted_form(&v.curve(), m, h, h)
}

fn restricted_form(c: &DiscreteCurve, m: MetricOrder, h: [f64; 2], k: [f64; 2]) -> Result<f64> {
    let embed = |w: [f64; 2]| TangentVector::new(2, vec![0.0, 0.0, w[0], w[1], 0.0, 0.0]);
    curve::metric_eval(c, &embed(h)?, &embed(k)?, m)
}

/// The 2×2 matrix of the restricted metric at `v` in the standard basis.
pub fn restricted_tensor(m: MetricOrder, v: &TrianglePoint) -> Result<[[f64; 2]; 2]> {
    TrianglePoint::new(v.x, v.y)?;
    let c = v.curve();
    let g11 = restricted_form(&c, m, [1.0, 0.0], [1.0, 0.0])?;
    let g12 = restricted_form(&c, m, [1.0, 0.0], [0.0, 1.0])?;
    let g22 = restricted_form(&c, m, [0.0, 1.0], [0.0, 1.0])?;
    Ok([[g11, g12], [g12, g22]])
}

/// `(|g11 - g22| + 2|g12|) / (g11 + g22)`; zero exactly when the restricted
/// metric is a multiple of the identity.
pub fn anisotropy(m: MetricOrder, v: &TrianglePoint) -> Result<f64> {
    let g = restricted_tensor(m, v)?;
    Ok(((g[0][0] - g[1][1]).abs() + 2.0 * g[0][1].abs()) / (g[0][0] + g[1][1]))
}

/// Restricted metric factor at `v = (1 - r, 0)`, computed in coordinates
/// translated by `(-1, 0)` so that `|e_0| = r` exactly for tiny `r`.
fn radial_oracle(m: MetricOrder, r: f64) -> Result<f64> {
    let c = DiscreteCurve::from_points(&[[0.0, 0.0], [-r, 0.0], [-2.0, 0.0]])?;
    let along = restricted_form(&c, m, [1.0, 0.0], [1.0, 0.0])?;
    let across = restricted_form(&c, m, [0.0, 1.0], [0.0, 1.0])?;
    Ok(0.5 * (along + across))
}

/// `f_m(1 - r, 0)`, closed form when available.
pub fn radial_factor(m: MetricOrder, r: f64) -> Result<f64> {
    match conformal_factor_lengths(m.get(), r, 2.0 - r) {
        Some(f) => Ok(f),
        None => radial_oracle(m, r),
    }
}

/// Power-law fit `f_m(1 - r, 0) ≈ C r^p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupFit {
    pub m: u32,
    pub exponent: f64,
    pub constant: f64,
    /// Whether `f_m` came from a closed form (`m ≤ 2`) or the general oracle.
    pub closed_form: bool,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

/// Least-squares fit of `log f_m` against `log r` along `v = (1 - r, 0)`.
///
/// For `m ≥ 3` the values come from the general oracle and the fit is only
/// an estimate of the leading behaviour.
pub fn estimate_blowup_exponent(m: MetricOrder, radii: &[f64]) -> Result<BlowupFit> {
    if radii.len() < 2 {
        return Err(Error::InvalidConfig("need at least two radii".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r < 1.0)) || radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidConfig("radii must be strictly decreasing in (0, 1)".into()));
    }
    let values = radii.iter().map(|&r| radial_factor(m, r)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|f| f.ln()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    Ok(BlowupFit {
        m: m.get(),
        exponent: slope,
        constant: intercept.exp(),
        closed_form: m.get() <= 2,
        radii: radii.to_vec(),
        values,
    })
}

/// `count` radii log-spaced from `hi` down to `lo`.
pub fn log_radii(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RadialClass {
    /// Finite distance to the singularity.
    Convergent,
    /// Partial sums grow without bound.
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialReport {
    pub m: u32,
    pub r0: f64,
    pub classification: RadialClass,
    /// Limit including the tail estimate; only for `Convergent`.
    pub value: Option<f64>,
    pub partial_sum: f64,
    pub levels: usize,
    pub last_increment: f64,
    pub tail_estimate: f64,
}

pub const RADIAL_TAIL_TOL: f64 = 1e-6;
pub const RADIAL_DIVERGENCE_THRESHOLD: f64 = 1e3;
pub const RADIAL_MIN_LEVELS: usize = 40;
/// Consecutive growing increments that also establish divergence.
pub const RADIAL_GROWTH_LEVELS: usize = 8;
pub const RADIAL_MAX_LEVELS: usize = 1000;

/// Integrand of the radial length in `u = ln r`: `r·√f_m(r)`.
fn radial_integrand(m: MetricOrder, r: f64) -> Result<f64> {
    match scaled_conformal_factor(m.get(), r, 2.0 - r) {
        Some(s) => Ok(s.sqrt() * r.powf(1.0 - 0.5 * m.get() as f64)),
        None => Ok(radial_oracle(m, r)?.sqrt() * r),
    }
}

/// Adaptive Simpson with tolerance `rel_tol` relative to the first estimate.
fn simpson<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    fn rec<F: FnMut(f64) -> Result<f64>>(
        f: &mut F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)? + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    let (fa, fm, fb) = (f(a)?, f(0.5 * (a + b))?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    rec(f, a, b, fa, fm, fb, whole, tol, 20)
}

/// Length of the radial path `v(r) = (1 - r, 0)`, `r ∈ (0, r0]`, under the
/// restricted metric, integrated level by level over `[r0 2^{-k-1}, r0 2^{-k}]`.
pub fn radial_length(m: MetricOrder, r0: f64) -> Result<RadialReport> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidConfig(format!("r0 = {r0} must lie in (0, 1)")));
    }
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    let mut report = RadialReport {
        m: m.get(),
        r0,
        classification: RadialClass::Inconclusive,
        value: None,
        partial_sum: 0.0,
        levels: 0,
        last_increment: 0.0,
        tail_estimate: f64::INFINITY,
    };
    let mut monotone = true;
    let mut growing = 0;
    let ln2 = std::f64::consts::LN_2;
    for k in 0..RADIAL_MAX_LEVELS {
        let hi = r0.ln() - k as f64 * ln2;
        let lo = hi - ln2;
        let mut f = |u: f64| radial_integrand(m, u.exp());
        let inc = match simpson(&mut f, lo, hi, 1e-12) {
            Ok(v) => v,
            // the general oracle reached the edge-length floor
            Err(Error::RegularityViolation { .. }) if m.get() > 2 => return Ok(report),
            Err(e) => return Err(e),
        };
        monotone &= inc > 0.0;
        growing = if prev.is_some_and(|p| inc >= p) { growing + 1 } else { 0 };
        sum += inc;
        report.levels = k + 1;
        report.partial_sum = sum;
        report.last_increment = inc;
        if let Some(p) = prev {
            let q = inc / p;
            report.tail_estimate = if q < 1.0 { inc * q / (1.0 - q) } else { f64::INFINITY };
            if report.tail_estimate < RADIAL_TAIL_TOL {
                report.classification = RadialClass::Convergent;
                report.value = Some(sum + report.tail_estimate);
                return Ok(report);
            }
        }
        if monotone
            && sum > RADIAL_DIVERGENCE_THRESHOLD
            && (report.levels >= RADIAL_MIN_LEVELS || growing >= RADIAL_GROWTH_LEVELS)
        {
            report.classification = RadialClass::Divergent;
            return Ok(report);
        }
        prev = Some(inc);
    }
    Ok(report)
}

/// Source of the conformal factor of a planar metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConformalFactor {
    /// Closed-form `f_m`, `m ≤ 2`.
    Sobolev { m: u32 },
    /// `f ≡ c`; Brownian motion is Euclidean BM slowed by `c`.
    Constant { c: f64 },
}

/// The planar metric `f·I₂` on the punctured plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConformalMetric {
    pub factor: ConformalFactor,
}

impl ConformalMetric {
    pub fn sobolev(m: MetricOrder) -> Result<Self> {
        if m.get() > 2 {
            return Err(Error::InvalidConfig(format!("no closed-form conformal factor for m = {m}")));
        }
        Ok(Self { factor: ConformalFactor::Sobolev { m: m.get() } })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!("conformal factor {c} must be positive")));
        }
        Ok(Self { factor: ConformalFactor::Constant { c } })
    }

    pub fn factor_at<S: Real>(&self, x: S, y: S) -> S {
        match self.factor {
            ConformalFactor::Constant { c } => S::from_f64(c),
            ConformalFactor::Sobolev { m } => {
                let one = S::from_f64(1.0);
                let a = ((x - one) * (x - one) + y * y).sqrt();
                let b = ((x + one) * (x + one) + y * y).sqrt();
                conformal_factor_lengths(m, a, b).expect("order checked on construction")
            }
        }
    }
}

impl MetricField for ConformalMetric {
    fn dim(&self) -> usize {
        2
    }

    fn tensor<S: Real>(&self, x: &[S]) -> Vec<S> {
        let f = self.factor_at(x[0], x[1]);
        vec![f, S::zero(), S::zero(), f]
    }

    fn validate(&self, x: &[f64]) -> Result<()> {
        TrianglePoint::new(x[0], x[1]).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriangleBmConfig {
    pub metric: ConformalMetric,
    pub v0: TrianglePoint,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub record_every: usize,
    pub edge_floor: f64,
}

impl TriangleBmConfig {
    pub fn new(metric: ConformalMetric, v0: TrianglePoint) -> Self {
        Self {
            metric,
            v0,
            dt: crate::brownian::DEFAULT_DT,
            n_steps: 0,
            seed: 0,
            record_every: crate::brownian::DEFAULT_RECORD_EVERY,
            edge_floor: DEFAULT_EDGE_FLOOR,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        if !(self.edge_floor > 0.0) {
            return Err(Error::InvalidConfig("edge_floor must be positive".into()));
        }
        if self.v0.singularity_distance() <= self.edge_floor {
            return Err(Error::InvalidConfig("v0 is within edge_floor of a singular point".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriangleTrajectory {
    pub dt: f64,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// Running minimum over all steps so far of the distance to `(±1, 0)`.
    pub min_singularity_distance: Vec<f64>,
    pub max_radius: f64,
    pub events: Vec<Event>,
    pub completed_steps: usize,
}

impl TriangleTrajectory {
    pub fn approached_singularity(&self) -> bool {
        self.events.iter().any(|e| matches!(e, Event::SingularityApproach { .. }))
    }

    pub fn overall_min_distance(&self) -> f64 {
        self.min_singularity_distance.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Brownian motion of the apex: `v ← v + √Δt · f(v)^{-1/2} ξ`. The drift of a
/// two-dimensional conformal metric vanishes identically.
pub fn simulate_triangle_bm(config: &TriangleBmConfig, run: u64) -> Result<TriangleTrajectory> {
    config.validate()?;
    let mut v = [config.v0.x, config.v0.y];
    let mut running_min = config.v0.singularity_distance();
    let mut tr = TriangleTrajectory {
        dt: config.dt,
        steps: vec![0],
        times: vec![0.0],
        points: vec![v],
        min_singularity_distance: vec![running_min],
        max_radius: config.v0.radius(),
        events: Vec::new(),
        completed_steps: 0,
    };
    let sdt = config.dt.sqrt();
    for k in 0..config.n_steps {
        let f = config.metric.factor_at(v[0], v[1]);
        let xi = gaussian_block(config.seed, run, k as u64, 2);
        let s = sdt / f.sqrt();
        v = [v[0] + s * xi[0], v[1] + s * xi[1]];
        let step = k + 1;
        let p = TrianglePoint { x: v[0], y: v[1] };
        let dist = p.singularity_distance();
        running_min = running_min.min(dist);
        tr.max_radius = tr.max_radius.max(p.radius());
        tr.completed_steps = step;
        if !(dist >= config.edge_floor) || !v[0].is_finite() || !v[1].is_finite() {
            tr.events.push(Event::SingularityApproach { step, t: step as f64 * config.dt, distance: dist });
            tr.steps.push(step);
            tr.times.push(step as f64 * config.dt);
            tr.points.push(v);
            tr.min_singularity_distance.push(running_min);
            break;
        }
        if step % config.record_every == 0 {
            tr.steps.push(step);
            tr.times.push(step as f64 * config.dt);
            tr.points.push(v);
            tr.min_singularity_distance.push(running_min);
        }
    }
    Ok(tr)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriangleRunSummary {
    pub run: u64,
    pub min_singularity_distance: f64,
    pub max_radius: f64,
    pub approach_step: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TriangleBmReport {
    pub config: TriangleBmConfig,
    pub runs: usize,
    pub horizon: f64,
    pub approach_count: usize,
    pub approach_fraction: f64,
    pub min_distance: Quantiles,
    pub max_radius: Quantiles,
    pub per_run: Vec<TriangleRunSummary>,
}

/// `n_runs` apex trajectories on streams `0..n_runs` with their summary.
pub fn triangle_bm_ensemble(config: &TriangleBmConfig, n_runs: usize) -> Result<(TriangleBmReport, Vec<TriangleTrajectory>)> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("ensemble needs at least one run".into()));
    }
    let trajectories: Vec<TriangleTrajectory> =
        (0..n_runs as u64).into_par_iter().map(|r| simulate_triangle_bm(config, r)).collect::<Result<_>>()?;
    let per_run: Vec<TriangleRunSummary> = trajectories
        .iter()
        .enumerate()
        .map(|(r, t)| TriangleRunSummary {
            run: r as u64,
            min_singularity_distance: t.overall_min_distance(),
            max_radius: t.max_radius,
            approach_step: t.events.iter().find_map(|e| match e {
                Event::SingularityApproach { step, .. } => Some(*step),
                _ => None,
            }),
        })
        .collect();
    let approach_count = per_run.iter().filter(|s| s.approach_step.is_some()).count();
    let dists: Vec<f64> = per_run.iter().map(|s| s.min_singularity_distance).collect();
    let radii: Vec<f64> = per_run.iter().map(|s| s.max_radius).collect();
    let report = TriangleBmReport {
        config: config.clone(),
        runs: n_runs,
        horizon: config.dt * config.n_steps as f64,
        approach_count,
        approach_fraction: approach_count as f64 / n_runs as f64,
        min_distance: Quantiles::of(&dists).unwrap(),
        max_radius: Quantiles::of(&radii).unwrap(),
        per_run,
    };
    Ok((report, trajectories))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub m: u32,
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Samples are taken at cell centres.
    pub sampling: &'static str,
    /// Values above this are replaced by it.
    pub clamp: f64,
    pub clamped_cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConformalGrid {
    pub spec: GridSpec,
    /// `(x, y, f)` rows, `x` fastest.
    pub rows: Vec<[f64; 3]>,
}

pub const GRID_RESOLUTION: usize = 400;
pub const GRID_EXTENT: f64 = 2.0;
pub const DEFAULT_GRID_CLAMP: f64 = 1e3;

/// `f_m` on the cell centres of a `resolution × resolution` grid over
/// `[-2, 2]²`, clamped at `clamp` for display.
pub fn conformal_grid(m: MetricOrder, resolution: usize, clamp: f64) -> Result<ConformalGrid> {
    if m.get() > 2 {
        return Err(Error::InvalidConfig(format!("no closed-form conformal factor for m = {m}")));
    }
    if resolution == 0 || !(clamp > 0.0) {
        return Err(Error::InvalidConfig("grid needs a positive resolution and clamp".into()));
    }
    let h = 2.0 * GRID_EXTENT / resolution as f64;
    let centre = |i: usize| -GRID_EXTENT + (i as f64 + 0.5) * h;
    let mut rows = Vec::with_capacity(resolution * resolution);
    let mut clamped = 0;
    for j in 0..resolution {
        for i in 0..resolution {
            let (x, y) = (centre(i), centre(j));
            let f = match TrianglePoint::new(x, y) {
                Ok(p) => conformal_factor(m, &p)?,
                Err(_) => f64::INFINITY,
            };
            if !(f <= clamp) {
                clamped += 1;
            }
            rows.push([x, y, f.min(clamp)]);
        }
    }
    Ok(ConformalGrid {
        spec: GridSpec {
            m: m.get(),
            nx: resolution,
            ny: resolution,
            x_min: -GRID_EXTENT,
            x_max: GRID_EXTENT,
            y_min: -GRID_EXTENT,
            y_max: GRID_EXTENT,
            sampling: "cell-centres",
            clamp,
            clamped_cells: clamped,
        },
        rows,
    })
}

/// Smallest value of `f_m(v)·|v - (1,0)|^m` over a polar grid of the disc of
/// radius `radius` around `(1, 0)`.
pub fn singular_lower_bound(m: MetricOrder, radius: f64, n_r: usize, n_theta: usize) -> Result<f64> {
    let mut c = f64::INFINITY;
    for i in 1..=n_r {
        let r = radius * i as f64 / n_r as f64;
        for j in 0..n_theta {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
            let p = TrianglePoint::new(1.0 + r * th.cos(), r * th.sin())?;
            c = c.min(conformal_factor(m, &p)? * p.e0_len().powi(m.get() as i32));
        }
    }
    Ok(c)
}
