//! Straight-line transcription of the discrete metric used as an oracle.
//!
//! Written over complex numbers so that complex-step differentiation gives
//! metric derivatives to working precision without touching library code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

pub fn points(d: usize, x: &[C]) -> Vec<Vec<C>> {
    x.chunks(d).map(|p| p.to_vec()).collect()
}

/// |e_i| with the analytic square root, so complex steps propagate.
pub fn edge_lengths(d: usize, x: &[C]) -> Vec<C> {
    let v = points(d, x);
    let n = v.len();
    (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            let mut s = C::new(0.0, 0.0);
            for a in 0..d {
                let e = v[j][a] - v[i][a];
                s += e * e;
            }
            s.sqrt()
        })
        .collect()
}

pub fn arc_derivative(d: usize, x: &[C], h: &[C], m: u32) -> Vec<Vec<C>> {
    let e = edge_lengths(d, x);
    let n = e.len();
    let mut w = points(d, h);
    for step in 1..=m {
        let prev = w.clone();
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            for a in 0..d {
                w[i][a] = if step % 2 == 1 {
                    (prev[ip][a] - prev[i][a]) / e[i]
                } else {
                    (prev[i][a] - prev[im][a]) / ((e[i] + e[im]) * 0.5)
                };
            }
        }
    }
    w
}

pub fn metric(d: usize, x: &[C], h: &[C], k: &[C], m: u32) -> C {
    metric_with_mu_parity(d, x, h, k, m, m % 2 == 1)
}

/// The metric with the `μ_i` branch chosen by `odd_mu` instead of the
/// parity of `m`; only the matching choice is the real metric.
pub fn metric_with_mu_parity(d: usize, x: &[C], h: &[C], k: &[C], m: u32, odd_mu: bool) -> C {
    let e = edge_lengths(d, x);
    let n = e.len();
    let l: C = e.iter().sum();
    let hv = points(d, h);
    let kv = points(d, k);
    let dh = arc_derivative(d, x, h, m);
    let dk = arc_derivative(d, x, k, m);
    let mut total = C::new(0.0, 0.0);
    for i in 0..n {
        let im = (i + n - 1) % n;
        let avg = (e[i] + e[im]) * 0.5;
        let mu = if odd_mu { e[i] } else { avg };
        let mut low = C::new(0.0, 0.0);
        let mut high = C::new(0.0, 0.0);
        for a in 0..d {
            low += hv[i][a] * kv[i][a];
            high += dh[i][a] * dk[i][a];
        }
        total += low / l.powi(3) * avg + high / l.powf(3.0 - 2.0 * m as f64) * mu;
    }
    total
}

pub fn real(x: &[f64]) -> Vec<C> {
    x.iter().map(|&v| C::new(v, 0.0)).collect()
}

pub fn metric_real(d: usize, x: &[f64], h: &[f64], k: &[f64], m: u32) -> f64 {
    metric(d, &real(x), &real(h), &real(k), m).re
}

fn tensor_c(d: usize, x: &[C], m: u32) -> Vec<Vec<C>> {
    let dim = x.len();
    let basis = |j: usize| {
        let mut b = vec![C::new(0.0, 0.0); dim];
        b[j] = C::new(1.0, 0.0);
        b
    };
    (0..dim)
        .map(|p| (0..dim).map(|q| metric(d, x, &basis(p), &basis(q), m)).collect())
        .collect()
}

pub fn tensor(d: usize, x: &[f64], m: u32) -> DMatrix<f64> {
    let t = tensor_c(d, &real(x), m);
    let dim = x.len();
    DMatrix::from_fn(dim, dim, |p, q| t[p][q].re)
}

/// ∂G/∂x_j by complex step.
pub fn tensor_partial(d: usize, x: &[f64], m: u32, j: usize) -> DMatrix<f64> {
    const STEP: f64 = 1e-30;
    let mut z = real(x);
    z[j].im = STEP;
    let t = tensor_c(d, &z, m);
    let dim = x.len();
    DMatrix::from_fn(dim, dim, |p, q| t[p][q].im / STEP)
}

/// `b^j = ½ Σ_i ∂_i(G^{-1})_{ij} + ½ Σ_i (G^{-1})_{ij} ∂_i log √det G`.
pub fn drift(d: usize, x: &[f64], m: u32) -> DVector<f64> {
    let dim = x.len();
    let g = tensor(d, x, m);
    let ginv = g.clone().try_inverse().expect("invertible");
    let mut b = DVector::zeros(dim);
    let mut dlog = DVector::zeros(dim);
    let mut div = DVector::zeros(dim);
    for i in 0..dim {
        let dg = tensor_partial(d, x, m, i);
        let dinv = -&ginv * &dg * &ginv;
        dlog[i] = 0.5 * (&ginv * &dg).trace();
        for j in 0..dim {
            div[j] += dinv[(i, j)];
        }
    }
    b += 0.5 * div + 0.5 * &ginv * dlog;
    b
}

/// Lower Cholesky factor of `G^{-1}`.
pub fn sigma(d: usize, x: &[f64], m: u32) -> DMatrix<f64> {
    let ginv = tensor(d, x, m).try_inverse().expect("invertible");
    let ginv = 0.5 * (&ginv + ginv.transpose());
    ginv.cholesky().expect("positive definite").l()
}

/// One explicit Euler–Maruyama step `x + dt b(x) + √dt σ(x) ξ`.
pub fn em_step(d: usize, x: &[f64], m: u32, dt: f64, xi: &[f64]) -> Vec<f64> {
    let b = drift(d, x, m);
    let s = sigma(d, x, m);
    let noise = s * DVector::from_column_slice(xi);
    (0..x.len()).map(|i| x[i] + dt * b[i] + dt.sqrt() * noise[i]).collect()
}

/// Finite-difference drift from the transcribed tensor, fourth-order
/// central stencil with step `eps`.
pub fn drift_fd(d: usize, x: &[f64], m: u32, eps: f64) -> DVector<f64> {
    let dim = x.len();
    let at = |y: &[f64]| {
        let g = tensor(d, y, m);
        let det = g.clone().lu().determinant();
        (g.try_inverse().expect("invertible"), 0.5 * det.ln())
    };
    let (ginv, _) = at(x);
    let mut div = DVector::zeros(dim);
    let mut dlog = DVector::zeros(dim);
    for i in 0..dim {
        let shifted = |s: f64| {
            let mut y = x.to_vec();
            y[i] += s * eps;
            at(&y)
        };
        let (a, b, c, e) = (shifted(2.0), shifted(1.0), shifted(-1.0), shifted(-2.0));
        let stencil = |fa: f64, fb: f64, fc: f64, fe: f64| (-fa + 8.0 * fb - 8.0 * fc + fe) / (12.0 * eps);
        for j in 0..dim {
            div[j] += stencil(a.0[(i, j)], b.0[(i, j)], c.0[(i, j)], e.0[(i, j)]);
        }
        dlog[i] = stencil(a.1, b.1, c.1, e.1);
    }
    0.5 * div + 0.5 * &ginv * dlog
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
