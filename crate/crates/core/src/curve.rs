//! Discrete closed curves, their edge geometry, the discrete arc-length
//! derivative and the discrete Sobolev-type metric `g^m`.
//!
//! A curve with `n` vertices in `R^d` is stored as a flat vertex-major
//! coordinate vector (`x[i * d + a]` is coordinate `a` of vertex `i`). All
//! index arithmetic is cyclic. The metric only depends on the edge lengths,
//! so the numerical kernels below take the edge lengths as input and are
//! generic over [`Real`] so that they can be differentiated with dual numbers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Regularity floor for edge lengths, in curve coordinate units.
pub const EPS_EDGE: f64 = 1e-12;

/// Closed piecewise-linear curve with `n >= 3` vertices in `R^d`, `d >= 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurve {
    d: usize,
    n: usize,
    coords: Vec<f64>,
}

impl DiscreteCurve {
    /// Builds a curve from flat vertex-major coordinates.
    pub fn new(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::BadShape(format!("ambient dimension {d} < 2")));
        }
        if coords.len() % d != 0 {
            return Err(Error::BadShape(format!(
                "{} coordinates is not a multiple of d = {d}",
                coords.len()
            )));
        }
        let n = coords.len() / d;
        if n < 3 {
            return Err(Error::BadShape(format!("{n} vertices < 3")));
        }
        if let Some(bad) = coords.iter().find(|x| !x.is_finite()) {
            return Err(Error::BadShape(format!("non-finite coordinate {bad}")));
        }
        let curve = Self { d, n, coords };
        curve.check_regular(EPS_EDGE)?;
        Ok(curve)
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let d = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(points.len() * d);
        for p in points {
            let p = p.as_ref();
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.len() });
            }
            coords.extend_from_slice(p);
        }
        if d < 2 {
            return Err(Error::BadShape(format!("ambient dimension {d} < 2")));
        }
        Self::new(d, coords)
    }

    /// Regular `n`-gon inscribed in the circle of the given radius, placed in
    /// the first two coordinates, starting at `(radius, 0, ..)` and running
    /// counterclockwise.
    pub fn circle(n: usize, radius: f64, d: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::BadShape(format!("radius {radius} must be positive")));
        }
        if n < 3 || d < 2 {
            return Err(Error::BadShape(format!("need n >= 3 and d >= 2, got n = {n}, d = {d}")));
        }
        let mut coords = vec![0.0; n * d];
        for i in 0..n {
            let theta = 2.0 * PI * i as f64 / n as f64;
            coords[i * d] = radius * theta.cos();
            coords[i * d + 1] = radius * theta.sin();
        }
        Self::new(d, coords)
    }

    /// The unit square `[0,1]^2`, counterclockwise from the origin.
    pub fn square() -> Self {
        Self::new(2, vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).expect("unit square is regular")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the configuration space, `d * n`.
    pub fn dim(&self) -> usize {
        self.d * self.n
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        let i = i % self.n;
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d)
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        edge_lengths_generic(self.d, &self.coords)
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edge_lengths().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.d];
        for v in self.vertices() {
            for (ca, va) in c.iter_mut().zip(v) {
                *ca += va;
            }
        }
        c.iter_mut().for_each(|ca| *ca /= self.n as f64);
        c
    }

    /// Fails with `RegularityViolation` on the first edge not longer than `floor`.
    pub fn check_regular(&self, floor: f64) -> Result<()> {
        check_edges(self.d, &self.coords, floor)
    }

    /// Returns a curve with the same shape and new coordinates, re-validated.
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != self.coords.len() {
            return Err(Error::DimensionMismatch { expected: self.coords.len(), found: coords.len() });
        }
        Self::new(self.d, coords)
    }

    pub fn translated(&self, t: &[f64]) -> Result<Self> {
        let mut coords = self.coords.clone();
        for v in coords.chunks_exact_mut(self.d) {
            v.iter_mut().zip(t).for_each(|(x, s)| *x += s);
        }
        self.with_coords(coords)
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        self.with_coords(self.coords.iter().map(|x| lambda * x).collect())
    }

    /// Rotates the vertex labels: vertex `i` of the result is vertex `i + shift`.
    pub fn relabeled(&self, shift: usize) -> Self {
        let coords = (0..self.n).flat_map(|i| self.vertex(i + shift).to_vec()).collect();
        Self { d: self.d, n: self.n, coords }
    }
}

pub(crate) fn check_edges(d: usize, x: &[f64], floor: f64) -> Result<()> {
    for (i, len) in edge_lengths_generic(d, x).into_iter().enumerate() {
        if !(len > floor) {
            return Err(Error::RegularityViolation { edge: i, length: len });
        }
    }
    Ok(())
}

/// Tangent field: one vector in `R^d` per vertex, vertex-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    d: usize,
    n: usize,
    components: Vec<f64>,
}

impl TangentVector {
    pub fn new(d: usize, components: Vec<f64>) -> Result<Self> {
        if d == 0 || components.len() % d != 0 {
            return Err(Error::BadShape(format!(
                "{} components is not a multiple of d = {d}",
                components.len()
            )));
        }
        Ok(Self { d, n: components.len() / d, components })
    }

    pub fn zeros(d: usize, n: usize) -> Self {
        Self { d, n, components: vec![0.0; d * n] }
    }

    /// The same vector `c` at every vertex (an infinitesimal translation).
    pub fn constant(n: usize, c: &[f64]) -> Self {
        let d = c.len();
        Self { d, n, components: c.iter().copied().cycle().take(d * n).collect() }
    }

    /// Standard basis field `k` of the vertex-major flattening.
    pub fn basis(d: usize, n: usize, k: usize) -> Self {
        let mut t = Self::zeros(d, n);
        t.components[k] = 1.0;
        t
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn into_components(self) -> Vec<f64> {
        self.components
    }

    pub fn at(&self, i: usize) -> &[f64] {
        let i = i % self.n;
        &self.components[i * self.d..(i + 1) * self.d]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { d: self.d, n: self.n, components: self.components.iter().map(|x| s * x).collect() }
    }

    fn check_against(&self, c: &DiscreteCurve) -> Result<()> {
        if self.d != c.d {
            return Err(Error::DimensionMismatch { expected: c.d, found: self.d });
        }
        if self.n != c.n {
            return Err(Error::DimensionMismatch { expected: c.n, found: self.n });
        }
        Ok(())
    }
}

/// Order `m` of the Sobolev-type metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricOrder(pub u32);

impl MetricOrder {
    pub fn get(self) -> u32 {
        self.0
    }

    pub fn is_odd(self) -> bool {
        self.0 % 2 == 1
    }
}

impl std::fmt::Display for MetricOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Matrix of `g^m` in the standard vertex-major basis.
#[derive(Clone, Debug)]
pub struct MetricTensor {
    pub order: MetricOrder,
    pub matrix: DMatrix<f64>,
}

impl MetricTensor {
    pub fn quadratic_form(&self, h: &TangentVector) -> f64 {
        let v = DVector::from_column_slice(h.components());
        v.dot(&(&self.matrix * &v))
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.matrix.clone()).eigenvalues
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    /// Spectral condition number `λ_max / λ_min`.
    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        ev.max() / ev.min()
    }
}

/// `e_i = v_{i+1} - v_i` for every `i`, cyclically.
pub fn edges(c: &DiscreteCurve) -> Vec<Vec<f64>> {
    (0..c.n)
        .map(|i| c.vertex(i + 1).iter().zip(c.vertex(i)).map(|(b, a)| b - a).collect())
        .collect()
}

/// Total length `l = Σ |e_i|`.
pub fn total_length(c: &DiscreteCurve) -> f64 {
    c.edge_lengths().iter().sum()
}

/// `D_s^m h`, applied coordinate-wise.
pub fn arc_derivative(c: &DiscreteCurve, h: &TangentVector, m: MetricOrder) -> Result<TangentVector> {
    h.check_against(c)?;
    let lens = c.edge_lengths();
    let out = arc_derivative_generic(c.d, &lens, h.components(), m.0);
    TangentVector::new(c.d, out)
}

/// `g^m_c(h, k)`.
pub fn metric_eval(c: &DiscreteCurve, h: &TangentVector, k: &TangentVector, m: MetricOrder) -> Result<f64> {
    h.check_against(c)?;
    k.check_against(c)?;
    let lens = c.edge_lengths();
    Ok(metric_eval_generic(c.d, &lens, h.components(), k.components(), m.0))
}

/// Assembles `G^m` from the metric applied to standard basis fields.
///
/// The metric acts identically on every ambient coordinate, so the entry for
/// basis fields `(p, a)` and `(q, b)` vanishes unless `a == b` and equals the
/// scalar entry `A_pq` otherwise; `A` is assembled from the `D_s^m` images of
/// the scalar basis fields.
pub fn metric_tensor(c: &DiscreteCurve, m: MetricOrder) -> MetricTensor {
    let lens = c.edge_lengths();
    let block = scalar_block_generic(&lens, m.0);
    MetricTensor { order: m, matrix: kron_identity(&block, c.n, c.d) }
}

/// `A ⊗ I_d` for a row-major `n × n` block, in vertex-major ordering.
pub(crate) fn kron_identity(block: &[f64], n: usize, d: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n * d, n * d);
    for p in 0..n {
        for q in 0..n {
            let v = block[p * n + q];
            if v != 0.0 {
                for a in 0..d {
                    g[(p * d + a, q * d + a)] = v;
                }
            }
        }
    }
    g
}

// ---------------------------------------------------------------------------
// Generic kernels
// ---------------------------------------------------------------------------

/// Edge lengths `|e_i|` of flat vertex-major coordinates.
pub fn edge_lengths_generic<S: Real>(d: usize, x: &[S]) -> Vec<S> {
    let n = x.len() / d;
    (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            let mut s = S::zero();
            for a in 0..d {
                let e = x[j * d + a] - x[i * d + a];
                s += e * e;
            }
            s.sqrt()
        })
        .collect()
}

/// Recursive discrete arc-length derivative of a field with `d` components
/// per vertex. Step `j` (1-based) uses the forward rule when `j` is odd and
/// the backward rule over the averaged adjacent edge lengths when `j` is even.
pub fn arc_derivative_generic<S: Real>(d: usize, lens: &[S], h: &[S], m: u32) -> Vec<S> {
    let n = lens.len();
    debug_assert_eq!(h.len(), n * d);
    let half = S::from_f64(0.5);
    let mut cur = h.to_vec();
    let mut next = vec![S::zero(); h.len()];
    for step in 1..=m {
        for i in 0..n {
            if step % 2 == 1 {
                let ip = (i + 1) % n;
                let inv = lens[i].recip();
                for a in 0..d {
                    next[i * d + a] = (cur[ip * d + a] - cur[i * d + a]) * inv;
                }
            } else {
                let im = (i + n - 1) % n;
                let inv = (half * (lens[i] + lens[im])).recip();
                for a in 0..d {
                    next[i * d + a] = (cur[i * d + a] - cur[im * d + a]) * inv;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Per-vertex weights `((|e_i| + |e_{i-1}|)/2, μ_i)`.
pub(crate) fn vertex_weights<S: Real>(lens: &[S], m: u32) -> (Vec<S>, Vec<S>) {
    let n = lens.len();
    let half = S::from_f64(0.5);
    let avg: Vec<S> = (0..n).map(|i| half * (lens[i] + lens[(i + n - 1) % n])).collect();
    let mu = if m % 2 == 1 { lens.to_vec() } else { avg.clone() };
    (avg, mu)
}

pub(crate) fn total<S: Real>(lens: &[S]) -> S {
    lens.iter().fold(S::zero(), |acc, &x| acc + x)
}

pub fn metric_eval_generic<S: Real>(d: usize, lens: &[S], h: &[S], k: &[S], m: u32) -> S {
    let n = lens.len();
    let l = total(lens);
    let (avg, mu) = vertex_weights(lens, m);
    let dh = arc_derivative_generic(d, lens, h, m);
    let dk = arc_derivative_generic(d, lens, k, m);
    let mut low = S::zero();
    let mut high = S::zero();
    for i in 0..n {
        let mut hk = S::zero();
        let mut dhdk = S::zero();
        for a in 0..d {
            hk += h[i * d + a] * k[i * d + a];
            dhdk += dh[i * d + a] * dk[i * d + a];
        }
        low += hk * avg[i];
        high += dhdk * mu[i];
    }
    low * l.powi(-3) + high * l.powi(2 * m as i32 - 3)
}

/// Diagonal `(|e_i| + |e_{i-1}|) / (2 l³)` of the L² part of the scalar block.
/// The rest of the block annihilates constant fields.
pub fn mass_diagonal_generic<S: Real>(lens: &[S]) -> Vec<S> {
    let (avg, _) = vertex_weights(lens, 0);
    let scale = total(lens).powi(-3);
    avg.into_iter().map(|a| a * scale).collect()
}

/// Row-major `n × n` scalar block `A` with `G^m = A ⊗ I_d`.
pub fn scalar_block_generic<S: Real>(lens: &[S], m: u32) -> Vec<S> {
    let n = lens.len();
    let l = total(lens);
    let (avg, mu) = vertex_weights(lens, m);
    let low_scale = l.powi(-3);
    let high_scale = l.powi(2 * m as i32 - 3);

    // images[p][i] = (D_s^m e_p)_i; `support[i]` lists the p with a nonzero entry.
    let mut support: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    let mut e = vec![S::zero(); n];
    for p in 0..n {
        e[p] = S::from_f64(1.0);
        let img = arc_derivative_generic(1, lens, &e, m);
        e[p] = S::zero();
        for (i, v) in img.into_iter().enumerate() {
            if !v.is_structural_zero() {
                support[i].push((p, v));
            }
        }
    }

    let mut a = vec![S::zero(); n * n];
    for p in 0..n {
        a[p * n + p] = avg[p] * low_scale;
    }
    for (i, row) in support.iter().enumerate() {
        let w = mu[i] * high_scale;
        for (s, &(p, vp)) in row.iter().enumerate() {
            for &(q, vq) in &row[s..] {
                let v = w * (vp * vq);
                a[p * n + q] += v;
                if p != q {
                    a[q * n + p] += v;
                }
            }
        }
    }
    a
}
