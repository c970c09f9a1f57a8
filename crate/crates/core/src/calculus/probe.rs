//! Numerical probes of the edge-growth and volume-growth estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{geodesic_shoot, MetricField, SobolevMetric};
use crate::curve::{metric_eval, DiscreteCurve, MetricOrder, TangentVector};
use crate::error::{Error, Result};
use crate::rng::gaussian_block;

/// Rescales `h` to unit `g^m` norm.
pub fn normalize_tangent(c: &DiscreteCurve, h: &TangentVector, m: MetricOrder) -> Result<TangentVector> {
    let g = metric_eval(c, h, h, m)?;
    if !(g > 0.0) {
        return Err(Error::InvalidConfig("cannot normalize a zero tangent vector".into()));
    }
    Ok(h.scaled(1.0 / g.sqrt()))
}

/// `d/dt log|e_i(v(t))|` at `t = 0` for `v'(0) = h`, i.e.
/// `⟨e_i, h_{i+1} - h_i⟩ / |e_i|²`.
///
/// `h` must have unit `g^m` norm (relative tolerance `1e-8`); the edge-rate
/// bound `2^{-(m-1)}` is stated at unit norm.
pub fn log_edge_rate(c: &DiscreteCurve, h: &TangentVector, i: usize, m: MetricOrder) -> Result<f64> {
    let g = metric_eval(c, h, h, m)?;
    if (g - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidConfig(format!("tangent has g^{m}(h,h) = {g}, expected 1")));
    }
    Ok(edge_rate_raw(c, h, i))
}

pub(crate) fn edge_rate_raw(c: &DiscreteCurve, h: &TangentVector, i: usize) -> f64 {
    let (a, b) = (c.vertex(i), c.vertex(i + 1));
    let (ha, hb) = (h.at(i), h.at(i + 1));
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..c.d() {
        let e = b[k] - a[k];
        num += e * (hb[k] - ha[k]);
        den += e * e;
    }
    num / den
}

/// Result of [`probe_volume_growth`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GrowthReport {
    pub radii: Vec<f64>,
    /// Largest `log √det G^m` seen within geodesic distance `r` of the start.
    pub log_sqrt_det_max: Vec<f64>,
    pub fit_slope: f64,
    pub fit_intercept: f64,
    /// Largest absolute fit residual over the range of the data.
    pub fit_relative_residual: f64,
    /// Linear-in-`r` fit of `log V` adequate (relative residual ≤ 0.2), so
    /// that `∫ r dr / log V(r)` diverges. Empirical only.
    pub grigoryan_divergent: bool,
    pub samples: usize,
    /// Every sampled state satisfied `C_0 e^{-t/2^{m-1}} ≤ |e_i| ≤ C_1 e^{t/2^{m-1}}`.
    pub edge_bound_ok: bool,
    /// Largest `|log(|e_i(γ(t))| / |e_i(γ(0))|)| · 2^{m-1} / t` seen.
    pub max_edge_log_ratio_rate: f64,
}

pub const MAX_FIT_RESIDUAL: f64 = 0.2;

/// Least-squares line `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

struct Shot {
    /// (t, log √det G) along the path.
    log_det: Vec<(f64, f64)>,
    edge_ok: bool,
    max_rate: f64,
}

fn shoot_one(
    c0: &DiscreteCurve,
    m: MetricOrder,
    r_max: f64,
    step: f64,
    seed: u64,
    sample: u64,
) -> Result<Shot> {
    let metric = SobolevMetric::for_curve(c0, m);
    let raw = TangentVector::new(c0.d(), gaussian_block(seed, sample, 0, c0.dim()))?;
    let h = super::normalize_tangent(c0, &raw, m)?;
    let steps = (r_max / step).ceil().max(1.0) as usize;
    let path = geodesic_shoot(&metric, c0.coords(), h.components(), r_max, steps)?;

    let lens0 = c0.edge_lengths();
    let c_lo = lens0.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_hi = lens0.iter().cloned().fold(0.0, f64::max);
    let scale = 2f64.powi(m.get() as i32 - 1);
    let mut edge_ok = true;
    let mut max_rate: f64 = 0.0;
    let mut log_det = Vec::with_capacity(path.len());
    for s in &path {
        let jet = metric.jet(s.position.as_slice());
        log_det.push((s.t, jet.log_sqrt_det()?));
        let lens = crate::curve::edge_lengths_generic(c0.d(), s.position.as_slice());
        let growth = (s.t / scale).exp();
        for (l, l0) in lens.iter().zip(&lens0) {
            if *l < c_lo / growth * (1.0 - 1e-9) || *l > c_hi * growth * (1.0 + 1e-9) {
                edge_ok = false;
            }
            if s.t > 0.0 {
                max_rate = max_rate.max((l / l0).ln().abs() * scale / s.t);
            }
        }
    }
    Ok(Shot { log_det, edge_ok, max_rate })
}

/// Shoots `samples` unit-speed geodesics of `g^m` from `c0` in random
/// directions and records the growth of `log √det G^m` with geodesic radius.
///
/// Each sample draws its direction from its own noise stream, so the report
/// does not depend on how samples are scheduled.
pub fn probe_volume_growth(
    c0: &DiscreteCurve,
    m: MetricOrder,
    radii: &[f64],
    samples: usize,
    seed: u64,
    step: f64,
) -> Result<GrowthReport> {
    if m.get() < 2 {
        return Err(Error::InvalidConfig("volume growth probe requires m >= 2".into()));
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("radii must be positive and increasing".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let r_max = *radii.last().unwrap();
    let shots: Vec<Shot> = (0..samples as u64)
        .into_par_iter()
        .map(|s| shoot_one(c0, m, r_max, step, seed, s))
        .collect::<Result<_>>()?;

    let base = SobolevMetric::for_curve(c0, m).jet(c0.coords()).log_sqrt_det()?;
    let log_max: Vec<f64> = radii
        .iter()
        .map(|&r| {
            shots
                .iter()
                .flat_map(|s| s.log_det.iter().filter(|(t, _)| *t <= r * (1.0 + 1e-12)).map(|(_, v)| *v))
                .fold(base, f64::max)
        })
        .collect();
    Ok(summarize(radii, log_max, samples, shots.iter().all(|s| s.edge_ok), shots.iter().map(|s| s.max_rate).fold(0.0, f64::max)))
}

pub(crate) fn summarize(radii: &[f64], log_max: Vec<f64>, samples: usize, edge_ok: bool, max_rate: f64) -> GrowthReport {
    let (slope, intercept) = linear_fit(radii, &log_max);
    let range = log_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - log_max.iter().cloned().fold(f64::INFINITY, f64::min);
    let worst = radii
        .iter()
        .zip(&log_max)
        .map(|(r, y)| (y - (slope * r + intercept)).abs())
        .fold(0.0, f64::max);
    let rel = if range > 1e-12 { worst / range } else { 0.0 };
    GrowthReport {
        radii: radii.to_vec(),
        log_sqrt_det_max: log_max,
        fit_slope: slope,
        fit_intercept: intercept,
        fit_relative_residual: rel,
        grigoryan_divergent: slope.is_finite() && rel <= MAX_FIT_RESIDUAL,
        samples,
        edge_bound_ok: edge_ok,
        max_edge_log_ratio_rate: max_rate,
    }
}

/// Growth report for an arbitrary metric field, used with surrogates.
pub fn probe_volume_growth_field<M: MetricField>(
    metric: &M,
    x0: &[f64],
    radii: &[f64],
    samples: usize,
    seed: u64,
    step: f64,
) -> Result<GrowthReport> {
    let r_max = *radii.last().ok_or_else(|| Error::InvalidConfig("no radii".into()))?;
    let base = metric.jet(x0).log_sqrt_det()?;
    let n = metric.dim();
    let g0 = nalgebra::DMatrix::from_row_slice(n, n, &metric.tensor(x0));
    let shots: Vec<Vec<(f64, f64)>> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let raw = nalgebra::DVector::from_vec(gaussian_block(seed, s, 0, n));
            let h = &raw / raw.dot(&(&g0 * &raw)).sqrt();
            let steps = (r_max / step).ceil().max(1.0) as usize;
            let path = geodesic_shoot(metric, x0, h.as_slice(), r_max, steps)?;
            path.iter().map(|st| Ok((st.t, metric.jet(st.position.as_slice()).log_sqrt_det()?))).collect()
        })
        .collect::<Result<_>>()?;
    let log_max = radii
        .iter()
        .map(|&r| shots.iter().flatten().filter(|(t, _)| *t <= r * (1.0 + 1e-12)).map(|(_, v)| *v).fold(base, f64::max))
        .collect();
    Ok(summarize(radii, log_max, samples, true, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::FlatMetric;

    #[test]
    fn translation_has_zero_edge_rate() {
        let c = DiscreteCurve::from_points(&[[0.3, 0.1], [2.0, 0.5], [1.0, 2.0], [-0.5, 1.5]]).unwrap();
        let h = normalize_tangent(&c, &TangentVector::constant(4, &[1.0, 2.0]), MetricOrder(2)).unwrap();
        for i in 0..4 {
            assert!(log_edge_rate(&c, &h, i, MetricOrder(2)).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn edge_rate_requires_unit_norm() {
        let c = DiscreteCurve::circle(4, 1.0, 2).unwrap();
        let h = TangentVector::basis(2, 4, 0).scaled(10.0);
        assert!(matches!(log_edge_rate(&c, &h, 0, MetricOrder(2)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn stretching_an_edge() {
        // v_1 moves away from v_0 along e_0: rate = |h_1| / |e_0|
        let c = DiscreteCurve::square();
        let mut comps = vec![0.0; 8];
        comps[2] = 1.0;
        let h = TangentVector::new(2, comps).unwrap();
        assert!((edge_rate_raw(&c, &h, 0) - 1.0).abs() < 1e-15);
        assert!(edge_rate_raw(&c, &h, 1).abs() < 1e-15);
        assert!(edge_rate_raw(&c, &h, 2).abs() < 1e-15);
    }

    #[test]
    fn flat_surrogate_has_no_growth() {
        let report = probe_volume_growth_field(&FlatMetric { dim: 4 }, &[0.0; 4], &[0.5, 1.0, 1.5], 4, 3, 1e-2).unwrap();
        assert_eq!(report.fit_slope, 0.0);
        assert!(report.log_sqrt_det_max.iter().all(|&v| v == 0.0));
        assert!(report.grigoryan_divergent);
    }

    #[test]
    fn probe_rejects_bad_input() {
        let c = DiscreteCurve::circle(5, 1.0, 2).unwrap();
        assert!(probe_volume_growth(&c, MetricOrder(1), &[1.0], 2, 0, 1e-2).is_err());
        assert!(probe_volume_growth(&c, MetricOrder(2), &[1.0, 0.5], 2, 0, 1e-2).is_err());
        assert!(probe_volume_growth(&c, MetricOrder(2), &[1.0], 0, 0, 1e-2).is_err());
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (s, b) = linear_fit(&xs, &ys);
        assert!((s - 2.5).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
    }
}
