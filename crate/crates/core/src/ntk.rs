//! Empirical and limiting neural tangent kernels.
//!
//! For unit-norm inputs with correlation `c = <x_i, x_j>` the limiting kernel
//! is `H_inf[i][j] = (c + 1) * p(c, B)` with
//! `p(c, B) = Pr[w.x_i >= B, w.x_j >= B]`, `w ~ N(0, I)`. We evaluate `p` with
//! Plackett's identity for the bivariate normal orthant:
//!
//! ```text
//! p(c, B) = Q(B)^2 + (1 / 2 pi) * integral_0^{asin c} exp(-B^2 / (1 + sin t)) dt
//! ```
//!
//! on a composite 16-point Gauss-Legendre rule with 32 panels. The integrand
//! is smooth and bounded by one on the whole range, `c = +-1` need no special
//! branch, and the result is clamped to `[0, Q(B)]` against rounding.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ActivationMask, ModelState};
use crate::numerics::{dot, integrate, upper_tail, RngStream, SymMatrix};

/// Panels of the 16-point rule used for the pair probability (512 nodes).
pub const PAIR_PROB_PANELS: usize = 32;

/// `H(W, b)[i][j] = (1/m) sum_r (<x_i, x_j> + 1) I[r,i] I[r,j]`.
pub fn empirical_ntk(model: &ModelState, data: &Dataset) -> Result<SymMatrix> {
    let mask = model.activation_mask(data)?;
    Ok(empirical_ntk_with_mask(data, &mask))
}

/// Empirical kernel from a precomputed activation pattern.
pub fn empirical_ntk_with_mask(data: &Dataset, mask: &ActivationMask) -> SymMatrix {
    let n = data.len();
    let m = mask.neurons();
    let mut shared = vec![0u64; n * n];
    let mut on = Vec::with_capacity(n);
    for r in 0..m {
        on.clear();
        on.extend(mask.row(r).iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i));
        for (k, &i) in on.iter().enumerate() {
            for &j in &on[k..] {
                shared[i * n + j] += 1;
            }
        }
    }
    let inv_m = if m == 0 { 0.0 } else { 1.0 / m as f64 };
    SymMatrix::from_fn(n, |i, j| {
        let count = shared[i.min(j) * n + i.max(j)];
        (dot(data.column(i), data.column(j)) + 1.0) * count as f64 * inv_m
    })
}

/// `Z(W, b)`, an `m(d+1) x n` matrix whose `(r, i)` block is
/// `(1/sqrt(m)) I[r,i] a_r (x_i, -1)`. Stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrixZ {
    m: usize,
    d: usize,
    n: usize,
    columns: Vec<f64>,
}

impl FeatureMatrixZ {
    pub fn rows(&self) -> usize {
        self.m * (self.d + 1)
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col * self.rows() + row]
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let rows = self.rows();
        &self.columns[i * rows..(i + 1) * rows]
    }

    /// `Z^T Z`.
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::from_fn(self.n, |i, j| dot(self.column(i), self.column(j)))
    }

    /// `Z v` for `v` of length `n`, laid out like `ModelState::param_vec`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { what: "vector for Z", expected: self.n, found: v.len() });
        }
        let mut out = vec![0.0; self.rows()];
        for (i, &vi) in v.iter().enumerate() {
            for (o, z) in out.iter_mut().zip(self.column(i)) {
                *o += z * vi;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.columns, &self.columns).sqrt()
    }
}

pub fn feature_matrix_z(model: &ModelState, data: &Dataset) -> Result<FeatureMatrixZ> {
    let mask = model.activation_mask(data)?;
    let (m, d, n) = (model.neurons(), model.dim(), data.len());
    let rows = m * (d + 1);
    let mut columns = vec![0.0; rows * n];
    let scale = model.scale();
    for (i, x) in data.columns().enumerate() {
        let col = &mut columns[i * rows..(i + 1) * rows];
        for r in 0..m {
            if !mask.get(r, i) {
                continue;
            }
            let c = scale * model.signs()[r] as f64;
            let block = &mut col[r * (d + 1)..(r + 1) * (d + 1)];
            for (z, xk) in block.iter_mut().zip(x) {
                *z = c * xk;
            }
            block[d] = -c;
        }
    }
    Ok(FeatureMatrixZ { m, d, n, columns })
}

/// `Pr[g1 >= B, c g1 + sqrt(1 - c^2) g2 >= B]` for independent standard
/// normals, i.e. the probability that a Gaussian direction clears the
/// threshold on two unit vectors with correlation `c`.
pub fn pair_activation_probability(c: f64, bias: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::InvalidInput(format!("correlation must lie in [-1, 1], got {c}")));
    }
    if !(bias >= 0.0) || !bias.is_finite() {
        return Err(Error::InvalidInput(format!("bias must be finite and nonnegative, got {bias}")));
    }
    Ok(pair_probability_unchecked(c, bias))
}

fn pair_probability_unchecked(c: f64, bias: f64) -> f64 {
    let q = upper_tail(bias);
    let b2 = bias * bias;
    let integral = if b2 == 0.0 {
        c.asin()
    } else {
        integrate(0.0, c.asin(), PAIR_PROB_PANELS, |t| {
            let s = 1.0 + t.sin();
            if s <= 0.0 {
                0.0
            } else {
                (-b2 / s).exp()
            }
        })
    };
    (q * q + integral / (2.0 * PI)).clamp(0.0, q)
}

fn check_bias(bias: f64) -> Result<()> {
    if !(bias >= 0.0) || !bias.is_finite() {
        return Err(Error::InvalidInput(format!("bias must be finite and nonnegative, got {bias}")));
    }
    Ok(())
}

/// Correlation of two unit columns, clipped to `[-1, 1]` against rounding.
fn correlation(data: &Dataset, i: usize, j: usize) -> f64 {
    dot(data.column(i), data.column(j)).clamp(-1.0, 1.0)
}

/// `H_inf(B)` by deterministic quadrature. Dataset columns are unit norm
/// by construction, which the reduction to a correlation requires.
pub fn limiting_ntk_quadrature(data: &Dataset, bias: f64) -> Result<SymMatrix> {
    check_bias(bias)?;
    Ok(SymMatrix::from_fn(data.len(), |i, j| {
        let c = if i == j { 1.0 } else { correlation(data, i, j) };
        (dot(data.column(i), data.column(j)) + 1.0) * pair_probability_unchecked(c, bias)
    }))
}

/// Monte Carlo estimate of `H_inf(B)` from `samples` shared Gaussian
/// directions drawn from `stream`. Joint activation counts are accumulated
/// as integers, so the estimate does not depend on summation order.
pub fn limiting_ntk_mc(data: &Dataset, bias: f64, samples: usize, stream: RngStream) -> Result<SymMatrix> {
    if samples == 0 {
        return Err(Error::InvalidInput("Monte Carlo kernel needs at least one sample".into()));
    }
    if bias.is_nan() {
        return Err(Error::InvalidInput("bias is NaN".into()));
    }
    let (n, d) = (data.len(), data.dim());
    let mut sampler = stream.sampler();
    let mut w = vec![0.0; d];
    let mut on = Vec::with_capacity(n);
    let mut counts = vec![0u64; n * n];
    for _ in 0..samples {
        sampler.fill_gaussian(&mut w);
        on.clear();
        on.extend(data.columns().enumerate().filter(|(_, x)| dot(&w, x) >= bias).map(|(i, _)| i));
        for (k, &i) in on.iter().enumerate() {
            for &j in &on[k..] {
                counts[i * n + j] += 1;
            }
        }
    }
    let k = samples as f64;
    Ok(SymMatrix::from_fn(n, |i, j| {
        let frac = counts[i.min(j) * n + i.max(j)] as f64 / k;
        (dot(data.column(i), data.column(j)) + 1.0) * frac
    }))
}

/// Pairwise joint activation probabilities `P[i][j]`; the diagonal is
/// `p0 = Q(B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProbMatrix {
    bias: f64,
    p: SymMatrix,
}

impl PairProbMatrix {
    /// Wraps an explicit probability matrix, e.g. for a hand-built region.
    pub fn from_matrix(bias: f64, p: SymMatrix) -> Result<Self> {
        let n = p.dim();
        for i in 0..n {
            for j in 0..n {
                let v = p.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!("probability P[{i}][{j}] = {v} is outside [0, 1]")));
                }
            }
        }
        Ok(Self { bias, p })
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p.get(i, j)
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.p
    }

    /// Smallest off-diagonal entry, `None` when `n < 2`.
    pub fn min_off_diagonal(&self) -> Option<f64> {
        let n = self.dim();
        let mut min: Option<f64> = None;
        for i in 0..n {
            for j in i + 1..n {
                let v = self.p.get(i, j);
                min = Some(min.map_or(v, |m| m.min(v)));
            }
        }
        min
    }
}

pub fn pair_prob_matrix(data: &Dataset, bias: f64) -> Result<PairProbMatrix> {
    check_bias(bias)?;
    let p0 = upper_tail(bias);
    let p = SymMatrix::from_fn(data.len(), |i, j| {
        if i == j {
            p0
        } else {
            pair_probability_unchecked(correlation(data, i, j), bias)
        }
    });
    Ok(PairProbMatrix { bias, p })
}

/// How a kernel was produced, recorded in exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    Empirical,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelExport {
    pub n: usize,
    #[serde(rename = "B")]
    pub bias: f64,
    pub method: KernelMethod,
    /// Row-major entries.
    pub entries: Vec<Vec<f64>>,
}

impl KernelExport {
    pub fn new(kernel: &SymMatrix, bias: f64, method: KernelMethod) -> Self {
        let n = kernel.dim();
        Self { n, bias, method, entries: (0..n).map(|i| kernel.row(i).to_vec()).collect() }
    }

    pub fn to_matrix(&self) -> Result<SymMatrix> {
        if self.entries.len() != self.n || self.entries.iter().any(|r| r.len() != self.n) {
            return Err(Error::InvalidInput(format!("kernel entries are not {0} x {0}", self.n)));
        }
        SymMatrix::from_row_major(self.n, self.entries.concat())
    }
}

/// Kernel CSV: a header row holding `n`, then `n` rows of `n` values.
pub fn write_kernel_csv(kernel: &SymMatrix, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    w.write_record([kernel.dim().to_string()])?;
    for i in 0..kernel.dim() {
        w.write_record(kernel.row(i).iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}
