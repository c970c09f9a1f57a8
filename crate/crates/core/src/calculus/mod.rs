//! Derivatives of the metric tensor, the Laplace–Beltrami drift, the
//! diffusion factor, geodesic shooting and numerical probes of the edge and
//! volume growth estimates.
//!
//! Everything here is written against [`MetricField`], a smooth field of SPD
//! matrices on an open subset of `R^N`. The Sobolev-type metric on discrete
//! curves is one implementation ([`SobolevMetric`]); flat and conformal
//! surrogates are others and serve as exactly solvable test cases.

mod geodesic;
mod probe;

pub use geodesic::{geodesic_shoot, geodesic_shoot_curve, GeodesicState, DEFAULT_GEODESIC_STEP};
pub use probe::{
    linear_fit, log_edge_rate, normalize_tangent, probe_volume_growth, probe_volume_growth_field, GrowthReport,
};

use nalgebra::{DMatrix, DVector};

use crate::curve::{self, DiscreteCurve, MetricOrder, EPS_EDGE};
use crate::error::{Error, Result};
use crate::scalar::{Dual, Real};

/// Condition-number level above which a metric evaluation is flagged.
pub const ILL_CONDITIONED: f64 = 1e12;

/// A smooth field of symmetric positive-definite matrices on an open subset
/// of `R^N`, together with its first derivatives.
pub trait MetricField: Sync {
    /// Dimension `N` of the coordinate space.
    fn dim(&self) -> usize;

    /// Row-major `N × N` tensor at `x`, generic so it can be differentiated.
    fn tensor<S: Real>(&self, x: &[S]) -> Vec<S>;

    /// Checks that `x` lies in the domain.
    fn validate(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Tensor and all coordinate partials. The default runs one dual-number
    /// pass per coordinate.
    fn jet(&self, x: &[f64]) -> MetricJet {
        dual_jet(self, x)
    }
}

/// One forward-mode pass per coordinate through [`MetricField::tensor`].
pub fn dual_jet<M: MetricField + ?Sized>(metric: &M, x: &[f64]) -> MetricJet {
    let n = metric.dim();
    let mut seeded: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
    let mut value = None;
    let mut partials = Vec::with_capacity(n);
    for j in 0..n {
        seeded[j].eps = 1.0;
        let t = metric.tensor(&seeded);
        seeded[j].eps = 0.0;
        if value.is_none() {
            value = Some(DMatrix::from_row_iterator(n, n, t.iter().map(|v| v.re)));
        }
        partials.push(DMatrix::from_row_iterator(n, n, t.iter().map(|v| v.eps)));
    }
    let value = value.unwrap_or_else(|| {
        let t = metric.tensor(x);
        DMatrix::from_row_slice(n, n, &t)
    });
    MetricJet::Dense { value, partials }
}

/// Metric tensor with its partial derivatives `∂G/∂x_j`.
#[derive(Clone, Debug)]
pub enum MetricJet {
    Dense { value: DMatrix<f64>, partials: Vec<DMatrix<f64>> },
    /// `G = A ⊗ I_d` in vertex-major ordering; `partials[j] = ∂A/∂x_j` for
    /// every one of the `n·d` coordinates.
    Block { d: usize, value: DMatrix<f64>, partials: Vec<DMatrix<f64>>, split: Option<MeanSplit> },
}

/// Diagonal part `D` of a block `A` for which `(A - D)·1 = 0` at every point,
/// with its partials.
///
/// When `A - D` is much larger than `D`, constant fields are a near-null
/// direction of `A` and rounding in `A - D` swamps them. Factoring in a basis
/// whose first vector is `1/√n`, with the exact zeros of `A - D` restored,
/// keeps that direction accurate.
#[derive(Clone, Debug)]
pub struct MeanSplit {
    pub diagonal: DVector<f64>,
    pub partials: Vec<DVector<f64>>,
}

/// Householder reflection `Q = I - 2wwᵀ` exchanging `e_0` and `1/√n`.
#[derive(Clone, Debug)]
struct MeanReflection {
    w: DVector<f64>,
}

impl MeanReflection {
    fn new(n: usize) -> Self {
        let u = 1.0 / (n as f64).sqrt();
        let mut w = DVector::from_element(n, u);
        w[0] -= 1.0;
        let norm = w.norm();
        if norm > 0.0 {
            w /= norm;
        }
        Self { w }
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.w * (2.0 * self.w.dot(v))
    }

    /// `QMQ`.
    fn conjugate(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let w = &self.w;
        let mw = m * w;
        let wm = w.transpose() * m;
        let wmw = w.dot(&mw);
        m - (w * wm) * 2.0 - (&mw * w.transpose()) * 2.0 + (w * w.transpose()) * (4.0 * wmw)
    }
}

fn zero_first(mut m: DMatrix<f64>, row: bool, col: bool) -> DMatrix<f64> {
    if row {
        m.row_mut(0).fill(0.0);
    }
    if col {
        m.column_mut(0).fill(0.0);
    }
    m
}

/// A factored block.
enum Factor {
    Plain(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    /// Cholesky of `QAQ`.
    Split { q: MeanReflection, chol: nalgebra::Cholesky<f64, nalgebra::Dyn> },
}

impl Factor {
    fn chol(&self) -> &nalgebra::Cholesky<f64, nalgebra::Dyn> {
        match self {
            Factor::Plain(c) | Factor::Split { chol: c, .. } => c,
        }
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Plain(c) => c.solve(b),
            Factor::Split { q, chol } => q.apply(&chol.solve(&q.apply(b))),
        }
    }

    /// `(A^{-1}, PA^{-1}, PA^{-1}P)` with `P` the projection onto mean-free
    /// vectors; without a split all three are `A^{-1}`.
    fn inverses(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        match self {
            Factor::Plain(c) => {
                let inv = c.inverse();
                (inv.clone(), inv.clone(), inv)
            }
            Factor::Split { q, chol } => {
                let inv = chol.inverse();
                let y = q.conjugate(&zero_first(inv.clone(), true, false));
                let z = q.conjugate(&zero_first(inv.clone(), true, true));
                (q.conjugate(&inv), y, z)
            }
        }
    }

    fn log_det(&self) -> f64 {
        let l = self.chol().l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

impl MetricJet {
    pub fn dim(&self) -> usize {
        match self {
            MetricJet::Dense { value, .. } => value.nrows(),
            MetricJet::Block { d, value, .. } => d * value.nrows(),
        }
    }

    /// The full tensor `G`.
    pub fn tensor(&self) -> DMatrix<f64> {
        match self {
            MetricJet::Dense { value, .. } => value.clone(),
            MetricJet::Block { d, value, .. } => kron_identity(value, *d),
        }
    }

    /// Expands to the dense representation.
    pub fn to_dense(&self) -> MetricJet {
        match self {
            MetricJet::Dense { .. } => self.clone(),
            MetricJet::Block { d, value, partials, .. } => MetricJet::Dense {
                value: kron_identity(value, *d),
                partials: partials.iter().map(|p| kron_identity(p, *d)).collect(),
            },
        }
    }

    /// Dense `∂G/∂x_j` slices.
    pub fn partials_dense(&self) -> Vec<DMatrix<f64>> {
        match self.to_dense() {
            MetricJet::Dense { partials, .. } => partials,
            MetricJet::Block { .. } => unreachable!(),
        }
    }

    /// The matrix that actually gets factored (`G` or its block `A`).
    fn core(&self) -> &DMatrix<f64> {
        match self {
            MetricJet::Dense { value, .. } | MetricJet::Block { value, .. } => value,
        }
    }

    fn block_dim(&self) -> usize {
        match self {
            MetricJet::Dense { .. } => 1,
            MetricJet::Block { d, .. } => *d,
        }
    }

    fn factor(&self) -> Result<Factor> {
        match self {
            MetricJet::Block { value, split: Some(split), .. } => {
                let q = MeanReflection::new(value.nrows());
                let low = DMatrix::from_diagonal(&split.diagonal);
                let high = zero_first(q.conjugate(&(value - &low)), true, true);
                let a = q.conjugate(&low) + high;
                let a = (&a + a.transpose()) * 0.5;
                Ok(Factor::Split { q, chol: spd_cholesky(&a)? })
            }
            _ => Ok(Factor::Plain(spd_cholesky(self.core())?)),
        }
    }

    /// `G^{-1} p`.
    pub fn solve(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.factor()?;
        let d = self.block_dim();
        if d == 1 {
            return Ok(f.solve(p));
        }
        let n = self.core().nrows();
        let mut out = DVector::zeros(n * d);
        for a in 0..d {
            let col = DVector::from_iterator(n, (0..n).map(|i| p[i * d + a]));
            let sol = f.solve(&col);
            for i in 0..n {
                out[i * d + a] = sol[i];
            }
        }
        Ok(out)
    }

    /// `G^{-1}`.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let inv = self.factor()?.inverses().0;
        Ok(kron_identity(&inv, self.block_dim()))
    }

    /// `uᵀ (∂G/∂x_j) u`.
    pub fn partial_quadratic(&self, j: usize, u: &DVector<f64>) -> f64 {
        match self {
            MetricJet::Dense { partials, .. } => u.dot(&(&partials[j] * u)),
            MetricJet::Block { d, partials, .. } => {
                let n = partials[j].nrows();
                let mut s = 0.0;
                for a in 0..*d {
                    let col = DVector::from_iterator(n, (0..n).map(|i| u[i * d + a]));
                    s += col.dot(&(&partials[j] * &col));
                }
                s
            }
        }
    }

    /// `log √det G`.
    pub fn log_sqrt_det(&self) -> Result<f64> {
        Ok(0.5 * self.factor()?.log_det() * self.block_dim() as f64)
    }

    /// Cheap condition estimate `(max L_ii / min L_ii)²` from the Cholesky
    /// factor; a lower bound for the spectral condition number.
    pub fn condition_estimate(&self) -> Result<f64> {
        let f = self.factor()?;
        let l = f.chol().l_dirty();
        let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)]).collect();
        let hi = diag.iter().cloned().fold(0.0, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok((hi / lo).powi(2))
    }
}

fn kron_identity(a: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut g = DMatrix::zeros(n * d, n * d);
    for p in 0..n {
        for q in 0..n {
            let v = a[(p, q)];
            if v != 0.0 {
                for c in 0..d {
                    g[(p * d + c, q * d + c)] = v;
                }
            }
        }
    }
    g
}

fn spd_cholesky(m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularMetric("non-finite tensor entry".into()));
    }
    nalgebra::Cholesky::new(m.clone())
        .ok_or_else(|| Error::SingularMetric(format!("Cholesky factorization failed ({}×{})", m.nrows(), m.ncols())))
}

// ---------------------------------------------------------------------------
// Metric fields
// ---------------------------------------------------------------------------

/// Identity tensor on `R^N`; Brownian motion is standard Euclidean BM.
#[derive(Clone, Copy, Debug)]
pub struct FlatMetric {
    pub dim: usize,
}

impl MetricField for FlatMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn tensor<S: Real>(&self, _x: &[S]) -> Vec<S> {
        let n = self.dim;
        let mut t = vec![S::zero(); n * n];
        for i in 0..n {
            t[i * n + i] = S::from_f64(1.0);
        }
        t
    }
}

/// The discrete Sobolev-type metric `g^m` on curves with `n` vertices in `R^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevMetric {
    pub d: usize,
    pub n: usize,
    pub order: MetricOrder,
}

impl SobolevMetric {
    pub fn new(d: usize, n: usize, order: MetricOrder) -> Self {
        Self { d, n, order }
    }

    pub fn for_curve(c: &DiscreteCurve, order: MetricOrder) -> Self {
        Self::new(c.d(), c.n(), order)
    }

    /// Scalar block `A`, its partials `∂A/∂x_j` and the split of its mass
    /// diagonal (a [`MeanSplit`] only for `m ≥ 1`), computed with one dual pass per edge length followed
    /// by the chain rule through `|e_i|`.
    pub fn block_jet(&self, x: &[f64]) -> (DMatrix<f64>, Vec<DMatrix<f64>>, MeanSplit) {
        let (d, n, m) = (self.d, self.n, self.order.get());
        let lens = curve::edge_lengths_generic(d, x);
        let mut seeded: Vec<Dual> = lens.iter().map(|&l| Dual::constant(l)).collect();
        let mut value = DMatrix::zeros(n, n);
        let mut diagonal = DVector::zeros(n);
        let mut by_length = Vec::with_capacity(n);
        let mut low_by_length = Vec::with_capacity(n);
        for i in 0..n {
            seeded[i].eps = 1.0;
            let a = curve::scalar_block_generic(&seeded, m);
            let low = curve::mass_diagonal_generic(&seeded);
            seeded[i].eps = 0.0;
            if i == 0 {
                value = DMatrix::from_row_iterator(n, n, a.iter().map(|v| v.re));
                diagonal = DVector::from_iterator(n, low.iter().map(|v| v.re));
            }
            by_length.push(DMatrix::from_row_iterator(n, n, a.iter().map(|v| v.eps)));
            low_by_length.push(DVector::from_iterator(n, low.iter().map(|v| v.eps)));
        }

        // |e_i| depends on v_i (through -e_i/|e_i|) and v_{i+1} (through +e_i/|e_i|).
        let mut partials = Vec::with_capacity(n * d);
        let mut low_partials = Vec::with_capacity(n * d);
        for p in 0..n {
            let prev = (p + n - 1) % n;
            for a in 0..d {
                let e_prev = x[p * d + a] - x[prev * d + a];
                let e_next = x[((p + 1) % n) * d + a] - x[p * d + a];
                let w_prev = e_prev / lens[prev];
                let w_next = -e_next / lens[p];
                partials.push(&by_length[prev] * w_prev + &by_length[p] * w_next);
                low_partials.push(&low_by_length[prev] * w_prev + &low_by_length[p] * w_next);
            }
        }
        (value, partials, MeanSplit { diagonal, partials: low_partials })
    }
}

impl MetricField for SobolevMetric {
    fn dim(&self) -> usize {
        self.d * self.n
    }

    fn tensor<S: Real>(&self, x: &[S]) -> Vec<S> {
        let (d, n) = (self.d, self.n);
        let lens = curve::edge_lengths_generic(d, x);
        let a = curve::scalar_block_generic(&lens, self.order.get());
        let dim = d * n;
        let mut g = vec![S::zero(); dim * dim];
        for p in 0..n {
            for q in 0..n {
                for c in 0..d {
                    g[(p * d + c) * dim + q * d + c] = a[p * n + q];
                }
            }
        }
        g
    }

    fn validate(&self, x: &[f64]) -> Result<()> {
        curve::check_edges(self.d, x, EPS_EDGE)
    }

    fn jet(&self, x: &[f64]) -> MetricJet {
        let (value, partials, split) = self.block_jet(x);
        // for m = 0 the derivative term is a second mass term
        let split = (self.order.get() > 0).then_some(split);
        MetricJet::Block { d: self.d, value, partials, split }
    }
}

// ---------------------------------------------------------------------------
// Derivative, drift, diffusion
// ---------------------------------------------------------------------------

/// `∂G_{kℓ}/∂x_j` for the curve metric, as `dn` slices of `dn × dn` matrices
/// (slice `j` holds the derivative with respect to coordinate `j`).
pub fn metric_tensor_derivative(c: &DiscreteCurve, m: MetricOrder) -> Vec<DMatrix<f64>> {
    SobolevMetric::for_curve(c, m).jet(c.coords()).partials_dense()
}

/// Drift of the generator `½Δ` in coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftVector(pub DVector<f64>);

/// Lower-triangular `σ` with `σσᵀ = G^{-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionFactor {
    pub matrix: DMatrix<f64>,
}

impl DiffusionFactor {
    pub fn apply(&self, xi: &[f64]) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(xi)
    }
}

/// `b^j = ½ ∂_i g^{ij} + ½ g^{ij} ∂_i log √det g`, with
/// `∂_i g^{ij} = -(G^{-1} ∂_iG G^{-1})_{ij}` and
/// `∂_i log √det g = ½ tr(G^{-1} ∂_iG)`.
pub fn drift_from_jet(jet: &MetricJet) -> Result<DriftVector> {
    let factor = jet.factor()?;
    match jet {
        MetricJet::Dense { partials, .. } => {
            let inv = factor.inverses().0;
            let n = inv.nrows();
            let mut b = DVector::zeros(n);
            for (i, dg) in partials.iter().enumerate() {
                // row i of G^{-1} ∂_iG G^{-1}
                let row = inv.row(i) * dg * &inv;
                let trace = inv.component_mul(&dg.transpose()).sum();
                for j in 0..n {
                    b[j] += -0.5 * row[j] + 0.25 * inv[(i, j)] * trace;
                }
            }
            Ok(DriftVector(b))
        }
        MetricJet::Block { d, partials, split, .. } => {
            // ∂A = ∂D + ∂(A - D); the second part annihilates constants, so
            // A^{-1} ∂(A - D) A^{-1} = (PA^{-1})ᵀ ∂(A - D) (PA^{-1}).
            let (inv, y, z) = factor.inverses();
            let d = *d;
            let n = inv.nrows();
            let mut b = DVector::zeros(n * d);
            for p in 0..n {
                for c in 0..d {
                    let j = p * d + c;
                    let (row, trace) = match split {
                        Some(s) => {
                            let dlow = &s.partials[j];
                            let high = &partials[j] - DMatrix::from_diagonal(dlow);
                            let yp = y.column(p).transpose();
                            let row = inv.row(p).component_mul(&dlow.transpose()) * &inv + yp * &high * &y;
                            let trace = inv.diagonal().dot(dlow) + z.component_mul(&high.transpose()).sum();
                            (row, trace)
                        }
                        None => {
                            let da = &partials[j];
                            (inv.row(p) * da * &inv, inv.component_mul(&da.transpose()).sum())
                        }
                    };
                    for q in 0..n {
                        b[q * d + c] += -0.5 * row[q] + 0.25 * d as f64 * inv[(p, q)] * trace;
                    }
                }
            }
            Ok(DriftVector(b))
        }
    }
}

pub fn drift<M: MetricField>(metric: &M, x: &[f64]) -> Result<DriftVector> {
    drift_from_jet(&metric.jet(x))
}

/// Drift of Brownian motion on `(R_*^{d×n}, g^m)` at `c`.
pub fn drift_curve(c: &DiscreteCurve, m: MetricOrder) -> Result<DriftVector> {
    drift(&SobolevMetric::for_curve(c, m), c.coords())
}

/// Lower-triangular `σ` with `σσᵀ = M^{-1}` from a factorization of `M`
/// itself: with `P` the order-reversing permutation, `PMP = L̃L̃ᵀ` gives
/// `M = UUᵀ` for the upper-triangular `U = PL̃P`, and `σ = U^{-T} = P L̃^{-T} P`.
/// This is the Cholesky factor of `M^{-1}`; `M^{-1}` is never formed.
pub fn inverse_cholesky_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let reversed = DMatrix::from_fn(n, n, |i, j| m[(n - 1 - i, n - 1 - j)]);
    let chol = spd_cholesky(&reversed)?;
    let lt = chol.l().transpose();
    let x = lt
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::SingularMetric("triangular solve failed".into()))?;
    Ok(DMatrix::from_fn(n, n, |i, j| x[(n - 1 - i, n - 1 - j)]))
}

pub fn diffusion_from_jet(jet: &MetricJet) -> Result<DiffusionFactor> {
    let s = inverse_cholesky_factor(jet.core())?;
    Ok(DiffusionFactor { matrix: kron_identity(&s, jet.block_dim()) })
}

pub fn diffusion_factor<M: MetricField>(metric: &M, x: &[f64]) -> Result<DiffusionFactor> {
    diffusion_from_jet(&metric.jet(x))
}

pub fn diffusion_factor_curve(c: &DiscreteCurve, m: MetricOrder) -> Result<DiffusionFactor> {
    diffusion_factor(&SobolevMetric::for_curve(c, m), c.coords())
}
