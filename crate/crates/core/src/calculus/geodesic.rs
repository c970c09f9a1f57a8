//! Geodesic shooting in Hamiltonian form with fixed-step classical RK4.
//!
//! `ẋ = G^{-1} p`, `ṗ_j = ½ uᵀ (∂_j G) u` with `u = G^{-1} p`, which is
//! `-½ ∂_j (pᵀ G^{-1} p)`.

use nalgebra::{DMatrix, DVector};

use super::{MetricField, SobolevMetric};
use crate::curve::{DiscreteCurve, MetricOrder, TangentVector};
use crate::error::{Error, Result};

pub const DEFAULT_GEODESIC_STEP: f64 = 1e-3;

/// Relative Hamiltonian drift beyond which the step size is rejected.
pub const MAX_ENERGY_DRIFT: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GeodesicState {
    pub t: f64,
    pub position: DVector<f64>,
    pub momentum: DVector<f64>,
    /// `½ pᵀ G^{-1} p` at this state.
    pub hamiltonian: f64,
}

impl GeodesicState {
    pub fn curve(&self, d: usize) -> Result<DiscreteCurve> {
        DiscreteCurve::new(d, self.position.as_slice().to_vec())
    }
}

fn rhs<M: MetricField>(metric: &M, x: &DVector<f64>, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    metric.validate(x.as_slice())?;
    let jet = metric.jet(x.as_slice());
    let u = jet.solve(p)?;
    let dp = DVector::from_iterator(x.len(), (0..x.len()).map(|j| 0.5 * jet.partial_quadratic(j, &u)));
    Ok((u, dp))
}

fn hamiltonian<M: MetricField>(metric: &M, x: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
    let n = x.len();
    let g = DMatrix::from_row_slice(n, n, &metric.tensor(x.as_slice()));
    let chol = nalgebra::Cholesky::new(g).ok_or_else(|| Error::SingularMetric("Cholesky factorization failed".into()))?;
    Ok(0.5 * p.dot(&chol.solve(p)))
}

/// Shoots the geodesic from `x0` with initial velocity `h0` over `[0, t_end]`
/// using `steps` RK4 steps. Returns all `steps + 1` states.
///
/// Leaving the domain yields [`Error::GeodesicExit`] carrying the exit time;
/// a relative energy drift above `1e-3` yields [`Error::StepTooLarge`].
pub fn geodesic_shoot<M: MetricField>(
    metric: &M,
    x0: &[f64],
    h0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<Vec<GeodesicState>> {
    let n = metric.dim();
    if x0.len() != n || h0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len().max(h0.len()) });
    }
    if steps == 0 {
        return Err(Error::InvalidConfig("geodesic needs at least one step".into()));
    }
    if h0.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidConfig("initial velocity is zero".into()));
    }
    metric.validate(x0)?;
    let dt = t_end / steps as f64;
    let mut x = DVector::from_column_slice(x0);
    let mut p = DMatrix::from_row_slice(n, n, &metric.tensor(x0)) * DVector::from_column_slice(h0);
    let h_start = hamiltonian(metric, &x, &p)?;

    let exit = |t: f64, e: Error| match e {
        Error::RegularityViolation { edge, length } => Error::GeodesicExit { t, edge, length },
        other => other,
    };

    let mut out = Vec::with_capacity(steps + 1);
    out.push(GeodesicState { t: 0.0, position: x.clone(), momentum: p.clone(), hamiltonian: h_start });
    for k in 0..steps {
        let t = k as f64 * dt;
        let (k1x, k1p) = rhs(metric, &x, &p).map_err(|e| exit(t, e))?;
        let (k2x, k2p) = rhs(metric, &(&x + &k1x * (0.5 * dt)), &(&p + &k1p * (0.5 * dt))).map_err(|e| exit(t, e))?;
        let (k3x, k3p) = rhs(metric, &(&x + &k2x * (0.5 * dt)), &(&p + &k2p * (0.5 * dt))).map_err(|e| exit(t, e))?;
        let (k4x, k4p) = rhs(metric, &(&x + &k3x * dt), &(&p + &k3p * dt)).map_err(|e| exit(t, e))?;
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);

        let t_next = (k + 1) as f64 * dt;
        metric.validate(x.as_slice()).map_err(|e| exit(t_next, e))?;
        let h = hamiltonian(metric, &x, &p)?;
        let drift = (h - h_start).abs() / h_start.abs().max(f64::MIN_POSITIVE);
        if drift > MAX_ENERGY_DRIFT {
            return Err(Error::StepTooLarge { drift });
        }
        out.push(GeodesicState { t: t_next, position: x.clone(), momentum: p.clone(), hamiltonian: h });
    }
    Ok(out)
}

/// Geodesic of `g^m` starting at `c0` with velocity `h0`.
pub fn geodesic_shoot_curve(
    c0: &DiscreteCurve,
    h0: &TangentVector,
    t_end: f64,
    steps: usize,
    m: MetricOrder,
) -> Result<Vec<GeodesicState>> {
    if h0.d() != c0.d() || h0.n() != c0.n() {
        return Err(Error::DimensionMismatch { expected: c0.dim(), found: h0.components().len() });
    }
    geodesic_shoot(&SobolevMetric::for_curve(c0, m), c0.coords(), h0.components(), t_end, steps)
}
