//! Euler–Maruyama simulation of Brownian motion on `(R_*^{d×n}, g^m)`.
//!
//! One step is `v ← v + Δt·b(v) + √Δt·σ(v)·ξ` with `b` and `σ` evaluated at
//! the pre-step state and `ξ` a standard normal block addressed by
//! `(seed, run, step)`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{diffusion_from_jet, drift_from_jet, MetricField, SobolevMetric, ILL_CONDITIONED};
use crate::curve::{self, DiscreteCurve, MetricOrder};
use crate::error::{Error, Result};
use crate::rng::gaussian_block;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_RECORD_EVERY: usize = 10;
pub const DEFAULT_EDGE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub order: MetricOrder,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub initial: DiscreteCurve,
    pub record_every: usize,
    pub edge_floor: f64,
}

impl SimulationConfig {
    pub fn new(initial: DiscreteCurve, order: MetricOrder) -> Self {
        Self {
            order,
            dt: DEFAULT_DT,
            n_steps: 0,
            seed: 0,
            initial,
            record_every: DEFAULT_RECORD_EVERY,
            edge_floor: DEFAULT_EDGE_FLOOR,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        if !(self.edge_floor > 0.0) {
            return Err(Error::InvalidConfig(format!("edge_floor = {} must be positive", self.edge_floor)));
        }
        self.initial.check_regular(self.edge_floor).map_err(|_| {
            Error::InvalidConfig(format!("initial curve has an edge shorter than edge_floor = {:e}", self.edge_floor))
        })
    }
}

/// Standard normal vector `ξ^k ∈ R^{dn}`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDraw(pub Vec<f64>);

impl NoiseDraw {
    pub fn for_step(seed: u64, run: u64, step: usize, dim: usize) -> Self {
        Self(gaussian_block(seed, run, step as u64, dim))
    }
}

/// Something noteworthy that happened during a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    EdgeCollapse { step: usize, t: f64, edge: usize, length: f64 },
    SingularMetric { step: usize, t: f64, message: String },
    IllConditioned { step: usize, t: f64, condition_estimate: f64 },
    SingularityApproach { step: usize, t: f64, distance: f64 },
}

impl Event {
    /// Whether the event ended the run.
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Event::IllConditioned { .. })
    }
}

/// One explicit Euler–Maruyama update in coordinates.
pub fn em_update<M: MetricField>(metric: &M, x: &[f64], dt: f64, xi: &NoiseDraw) -> Result<Vec<f64>> {
    if xi.0.len() != metric.dim() {
        return Err(Error::DimensionMismatch { expected: metric.dim(), found: xi.0.len() });
    }
    let jet = metric.jet(x);
    let b = drift_from_jet(&jet)?.0;
    let sigma = diffusion_from_jet(&jet)?;
    let noise = sigma.apply(&xi.0);
    let x = DVector::from_column_slice(x) + b * dt + noise * dt.sqrt();
    Ok(x.as_slice().to_vec())
}

/// One step of Brownian motion on `(R_*^{d×n}, g^m)`; fails with
/// [`Error::EdgeCollapse`] if an edge of the result is not above `edge_floor`.
pub fn em_step(v: &DiscreteCurve, m: MetricOrder, dt: f64, xi: &NoiseDraw, edge_floor: f64) -> Result<DiscreteCurve> {
    let next = em_update(&SobolevMetric::for_curve(v, m), v.coords(), dt, xi)?;
    to_curve(v.d(), next, edge_floor)
}

fn to_curve(d: usize, x: Vec<f64>, edge_floor: f64) -> Result<DiscreteCurve> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMetric("non-finite state after update".into()));
    }
    if let Err(Error::RegularityViolation { edge, length }) = curve::check_edges(d, &x, edge_floor) {
        return Err(Error::EdgeCollapse { edge, length });
    }
    DiscreteCurve::new(d, x)
}

/// Recorded snapshots and per-snapshot statistics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub d: usize,
    pub n: usize,
    pub dt: f64,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub curves: Vec<DiscreteCurve>,
    pub centroid_series: Vec<Vec<f64>>,
    pub min_edge_series: Vec<f64>,
    pub length_series: Vec<f64>,
    pub events: Vec<Event>,
    /// Number of steps actually taken.
    pub completed_steps: usize,
}

impl TrajectoryRecord {
    fn new(d: usize, n: usize, dt: f64) -> Self {
        Self {
            d,
            n,
            dt,
            steps: Vec::new(),
            times: Vec::new(),
            curves: Vec::new(),
            centroid_series: Vec::new(),
            min_edge_series: Vec::new(),
            length_series: Vec::new(),
            events: Vec::new(),
            completed_steps: 0,
        }
    }

    fn record(&mut self, step: usize, c: &DiscreteCurve) {
        self.steps.push(step);
        self.times.push(step as f64 * self.dt);
        self.centroid_series.push(c.centroid());
        self.min_edge_series.push(c.min_edge_length());
        self.length_series.push(curve::total_length(c));
        self.curves.push(c.clone());
    }

    pub fn terminated_early(&self) -> bool {
        self.events.iter().any(Event::is_terminal)
    }

    /// Smallest edge length over all recorded states.
    pub fn min_edge_overall(&self) -> f64 {
        self.min_edge_series.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Runs the explicit scheme for an arbitrary metric field over curve
/// coordinates. `run` selects the noise stream.
pub fn simulate_field<M: MetricField>(metric: &M, config: &SimulationConfig, run: u64) -> Result<TrajectoryRecord> {
    config.validate()?;
    let c0 = &config.initial;
    if metric.dim() != c0.dim() {
        return Err(Error::DimensionMismatch { expected: c0.dim(), found: metric.dim() });
    }
    let mut rec = TrajectoryRecord::new(c0.d(), c0.n(), config.dt);
    rec.record(0, c0);
    let mut current = c0.clone();
    let mut ill = false;
    for k in 0..config.n_steps {
        let t = k as f64 * config.dt;
        let jet = metric.jet(current.coords());
        match jet.condition_estimate() {
            Ok(cond) if cond > ILL_CONDITIONED => {
                if !ill {
                    rec.events.push(Event::IllConditioned { step: k, t, condition_estimate: cond });
                }
                ill = true;
            }
            _ => ill = false,
        }
        let xi = NoiseDraw::for_step(config.seed, run, k, c0.dim());
        let next = (|| {
            let b = drift_from_jet(&jet)?.0;
            let noise = diffusion_from_jet(&jet)?.apply(&xi.0);
            let x = DVector::from_column_slice(current.coords()) + b * config.dt + noise * config.dt.sqrt();
            to_curve(c0.d(), x.as_slice().to_vec(), config.edge_floor)
        })();
        let step = k + 1;
        let t_next = step as f64 * config.dt;
        match next {
            Ok(c) => current = c,
            Err(Error::EdgeCollapse { edge, length }) => {
                rec.events.push(Event::EdgeCollapse { step, t: t_next, edge, length });
                break;
            }
            Err(e @ (Error::SingularMetric(_) | Error::RegularityViolation { .. })) => {
                rec.events.push(Event::SingularMetric { step, t: t_next, message: e.to_string() });
                break;
            }
            Err(e) => return Err(e),
        }
        rec.completed_steps = step;
        if step % config.record_every == 0 {
            rec.record(step, &current);
        }
    }
    Ok(rec)
}

/// Brownian motion on `(R_*^{d×n}, g^m)` from `config.initial`, noise stream 0.
///
/// Numerical breakdown ends the run early and is reported through
/// [`TrajectoryRecord::events`]; the states recorded so far are kept.
pub fn simulate(config: &SimulationConfig) -> Result<TrajectoryRecord> {
    simulate_run(config, 0)
}

pub fn simulate_run(config: &SimulationConfig, run: u64) -> Result<TrajectoryRecord> {
    simulate_field(&SobolevMetric::for_curve(&config.initial, config.order), config, run)
}

/// Order statistics of one observable at one recorded time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self { min: v[0], q10: q(0.1), q50: q(0.5), q90: q(0.9), max: v[v.len() - 1] })
    }
}

/// Per-time ensemble statistics; times follow the recording schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    /// Number of runs that reached each recorded time.
    pub alive: Vec<usize>,
    pub min_edge: Vec<Quantiles>,
    pub length: Vec<Quantiles>,
    /// Euclidean distance of the centroid from its initial position.
    pub centroid_displacement: Vec<Quantiles>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub runs: Vec<TrajectoryRecord>,
    pub stats: EnsembleStats,
}

impl EnsembleResult {
    /// `(run, event)` pairs in run order.
    pub fn events(&self) -> Vec<(usize, &Event)> {
        self.runs.iter().enumerate().flat_map(|(r, rec)| rec.events.iter().map(move |e| (r, e))).collect()
    }
}

/// `n_runs` independent trajectories; run `r` uses noise stream `r`, so run 0
/// reproduces [`simulate`] and the output does not depend on scheduling.
pub fn ensemble(config: &SimulationConfig, n_runs: usize) -> Result<EnsembleResult> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("ensemble needs at least one run".into()));
    }
    config.validate()?;
    let runs: Vec<TrajectoryRecord> =
        (0..n_runs as u64).into_par_iter().map(|r| simulate_run(config, r)).collect::<Result<_>>()?;
    let stats = aggregate(&runs);
    Ok(EnsembleResult { runs, stats })
}

pub fn aggregate(runs: &[TrajectoryRecord]) -> EnsembleStats {
    let longest = runs.iter().max_by_key(|r| r.steps.len()).expect("at least one run");
    let mut stats = EnsembleStats {
        steps: longest.steps.clone(),
        times: longest.times.clone(),
        alive: Vec::new(),
        min_edge: Vec::new(),
        length: Vec::new(),
        centroid_displacement: Vec::new(),
    };
    for k in 0..longest.steps.len() {
        let live: Vec<&TrajectoryRecord> = runs.iter().filter(|r| r.steps.len() > k).collect();
        let pick = |f: &dyn Fn(&TrajectoryRecord) -> f64| Quantiles::of(&live.iter().map(|r| f(r)).collect::<Vec<_>>()).unwrap();
        stats.alive.push(live.len());
        stats.min_edge.push(pick(&|r| r.min_edge_series[k]));
        stats.length.push(pick(&|r| r.length_series[k]));
        stats.centroid_displacement.push(pick(&|r| {
            r.centroid_series[k].iter().zip(&r.centroid_series[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        }));
    }
    stats
}
