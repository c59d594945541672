//! One-hidden-layer ReLU network with trainable biases:
//!
//! ```text
//! f(x; W, b) = (1/sqrt(m)) * sum_r a_r * max(0, <w_r, x> - b_r)
//! ```
//!
//! Biases are subtracted, so a positive initial bias `B` makes neurons
//! sparse. Output signs `a_r` are fixed at initialization; only `W` and `b`
//! train. The activation indicator is `<w_r, x> - b_r >= 0` everywhere
//! (forward pass, gradients and kernels alike).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{dot, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// I.i.d. Gaussian rows and uniform signs.
    Standard,
    /// Mirrored halves with opposite signs so the initial output is zero.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    /// Initial value `B >= 0` of every bias.
    pub bias: f64,
    pub seed: u64,
}

impl InitScheme {
    pub fn standard(bias: f64, seed: u64) -> Self {
        Self { kind: InitKind::Standard, bias, seed }
    }

    pub fn symmetric(bias: f64, seed: u64) -> Self {
        Self { kind: InitKind::Symmetric, bias, seed }
    }
}

/// Network parameters. `w` is row-major `m x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    m: usize,
    d: usize,
    w: Vec<f64>,
    b: Vec<f64>,
    a: Vec<i8>,
}

/// Parameter gradients of the squared loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub d: usize,
    /// Row-major `m x d`.
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
}

impl Gradients {
    pub fn weight_row(&self, r: usize) -> &[f64] {
        &self.gw[r * self.d..(r + 1) * self.d]
    }

    /// Flattened `[gw_r, gb_r]` blocks, neuron by neuron.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.gw.len() + self.gb.len());
        for (r, gb) in self.gb.iter().enumerate() {
            out.extend_from_slice(self.weight_row(r));
            out.push(*gb);
        }
        out
    }
}

/// Distance of a parameter state from a reference state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Movement {
    /// `max_r ||w_r - w_r(0)||`.
    pub rw_max: f64,
    /// `max_r |b_r - b_r(0)|`.
    pub rb_max: f64,
    /// `||[W, b] - [W(0), b(0)]||_F`.
    pub fro: f64,
}

/// Which examples activate which neurons: entry `(r, i)` is
/// `<w_r, x_i> - b_r >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationMask {
    m: usize,
    n: usize,
    bits: Vec<bool>,
}

impl ActivationMask {
    pub(crate) fn from_bits(m: usize, n: usize, bits: Vec<bool>) -> Self {
        debug_assert_eq!(bits.len(), m * n);
        Self { m, n, bits }
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn neurons(&self) -> usize {
        self.m
    }

    pub fn examples(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, i: usize) -> bool {
        self.bits[r * self.n + i]
    }

    pub fn row(&self, r: usize) -> &[bool] {
        &self.bits[r * self.n..(r + 1) * self.n]
    }

    /// `|S_on(i)|`: number of neurons active on example `i`.
    pub fn column_count(&self, i: usize) -> usize {
        (0..self.m).filter(|&r| self.get(r, i)).count()
    }

    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        for row in self.bits.chunks_exact(self.n) {
            for (c, &on) in counts.iter_mut().zip(row) {
                *c += on as usize;
            }
        }
        counts
    }

    /// Fraction of active `(r, i)` pairs.
    pub fn density(&self) -> f64 {
        self.bits.iter().filter(|&&b| b).count() as f64 / self.bits.len() as f64
    }
}

impl ModelState {
    pub fn from_parts(d: usize, w: Vec<f64>, b: Vec<f64>, a: Vec<i8>) -> Result<Self> {
        let m = b.len();
        if m == 0 || d == 0 {
            return Err(Error::InvalidInput("model needs m >= 1 and d >= 1".into()));
        }
        if w.len() != m * d {
            return Err(Error::DimensionMismatch { what: "weight matrix", expected: m * d, found: w.len() });
        }
        if a.len() != m {
            return Err(Error::DimensionMismatch { what: "output signs", expected: m, found: a.len() });
        }
        if let Some(r) = a.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput(format!("output sign a_{r} = {} is not +-1", a[r])));
        }
        if w.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("model parameters must be finite".into()));
        }
        Ok(Self { m, d, w, b, a })
    }

    /// Weights come from stream `(seed, 0)` row by row, signs from
    /// `(seed, 1)`. The symmetric scheme returns `2m` neurons with
    /// `w_{r+m} = w_r` and `a_{r+m} = -a_r`.
    pub fn init(scheme: &InitScheme, m: usize, d: usize) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::InvalidInput("model needs m >= 1 and d >= 1".into()));
        }
        if !(scheme.bias >= 0.0) || !scheme.bias.is_finite() {
            return Err(Error::InvalidInput(format!("initial bias must be finite and >= 0, got {}", scheme.bias)));
        }
        let mut weights = RngStream::new(scheme.seed, 0).sampler();
        let mut signs = RngStream::new(scheme.seed, 1).sampler();
        let mut w = vec![0.0; m * d];
        weights.fill_gaussian(&mut w);
        let mut a: Vec<i8> = (0..m).map(|_| signs.sign()).collect();
        if scheme.kind == InitKind::Symmetric {
            w.extend_from_within(..);
            a.extend(a.clone().into_iter().map(|s| -s));
        }
        let b = vec![scheme.bias; a.len()];
        Self::from_parts(d, w, b, a)
    }

    pub fn neurons(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weight_row(&self, r: usize) -> &[f64] {
        &self.w[r * self.d..(r + 1) * self.d]
    }

    pub fn biases(&self) -> &[f64] {
        &self.b
    }

    pub fn signs(&self) -> &[i8] {
        &self.a
    }

    /// Output scale `1/sqrt(m)`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.m as f64).sqrt()
    }

    /// `<w_r, x> - b_r`.
    #[inline]
    pub fn preactivation(&self, r: usize, x: &[f64]) -> f64 {
        dot(self.weight_row(r), x) - self.b[r]
    }

    pub(crate) fn weight_row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.w[r * self.d..(r + 1) * self.d]
    }

    pub(crate) fn bias_mut(&mut self, r: usize) -> &mut f64 {
        &mut self.b[r]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { what: "input vector", expected: self.d, found: x.len() });
        }
        Ok(())
    }

    pub(crate) fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.d {
            return Err(Error::DimensionMismatch { what: "dataset dimension", expected: self.d, found: data.dim() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("input vector must be finite".into()));
        }
        let mut acc = 0.0;
        for r in 0..self.m {
            acc += self.a[r] as f64 * relu(self.preactivation(r, x));
        }
        Ok(self.scale() * acc)
    }

    /// `f(x_i)` for every example, accumulated over neurons in index order.
    pub fn outputs(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.check_data(data)?;
        let mut acc = vec![0.0; data.len()];
        for r in 0..self.m {
            let sign = self.a[r] as f64;
            for (i, x) in data.columns().enumerate() {
                acc[i] += sign * relu(self.preactivation(r, x));
            }
        }
        let scale = self.scale();
        Ok(acc.into_iter().map(|v| scale * v).collect())
    }

    /// `f(x_i) - y_i` for every example.
    pub fn residuals(&self, data: &Dataset) -> Result<Vec<f64>> {
        let mut out = self.outputs(data)?;
        for (o, y) in out.iter_mut().zip(data.y()) {
            *o -= y;
        }
        Ok(out)
    }

    pub fn activation_mask(&self, data: &Dataset) -> Result<ActivationMask> {
        self.check_data(data)?;
        let n = data.len();
        let mut bits = Vec::with_capacity(self.m * n);
        for r in 0..self.m {
            bits.extend(data.columns().map(|x| self.preactivation(r, x) >= 0.0));
        }
        Ok(ActivationMask::from_bits(self.m, n, bits))
    }

    /// `L = 1/2 sum_i (f(x_i) - y_i)^2`.
    pub fn loss(&self, data: &Dataset) -> Result<f64> {
        Ok(half_squared_norm(&self.residuals(data)?))
    }

    pub fn gradients(&self, data: &Dataset) -> Result<Gradients> {
        let residual = self.residuals(data)?;
        let mask = self.activation_mask(data)?;
        let mut gw = vec![0.0; self.m * self.d];
        let mut gb = vec![0.0; self.m];
        for r in 0..self.m {
            gb[r] = self.neuron_gradient(r, data, &residual, mask.row(r), &mut gw[r * self.d..(r + 1) * self.d]);
        }
        Ok(Gradients { d: self.d, gw, gb })
    }

    /// Gradient of the loss with respect to `(w_r, b_r)` given the residual
    /// and neuron `r`'s activation row. Writes `dL/dw_r` into `gw` and
    /// returns `dL/db_r`. Shared by the dense and sparse training paths so
    /// both produce bit-identical updates.
    pub(crate) fn neuron_gradient(&self, r: usize, data: &Dataset, residual: &[f64], active: &[bool], gw: &mut [f64]) -> f64 {
        gw.fill(0.0);
        let mut bias_sum = 0.0;
        for (i, x) in data.columns().enumerate() {
            if active[i] {
                let coef = residual[i];
                for (g, xk) in gw.iter_mut().zip(x) {
                    *g += coef * xk;
                }
                bias_sum += coef;
            }
        }
        let c = self.scale() * self.a[r] as f64;
        for g in gw.iter_mut() {
            *g *= c;
        }
        -c * bias_sum
    }

    /// Movement of `self` away from `origin`.
    pub fn param_distance(&self, origin: &ModelState) -> Result<Movement> {
        if self.m != origin.m || self.d != origin.d {
            return Err(Error::DimensionMismatch {
                what: "model shape (m*d)",
                expected: origin.m * origin.d,
                found: self.m * self.d,
            });
        }
        let mut out = Movement::default();
        let mut total = 0.0;
        for r in 0..self.m {
            let dw: f64 = self
                .weight_row(r)
                .iter()
                .zip(origin.weight_row(r))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let db = self.b[r] - origin.b[r];
            out.rw_max = out.rw_max.max(dw.sqrt());
            out.rb_max = out.rb_max.max(db.abs());
            total += dw + db * db;
        }
        out.fro = total.sqrt();
        Ok(out)
    }

    /// Flattened `[w_r, b_r]` blocks, neuron by neuron (the layout of the
    /// feature matrix rows).
    pub fn param_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m * (self.d + 1));
        for r in 0..self.m {
            out.extend_from_slice(self.weight_row(r));
            out.push(self.b[r]);
        }
        out
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_checkpoint(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_checkpoint(&mut bytes.as_slice())
    }

    /// Binary checkpoint: magic `SNTK`, `u32` version, `u64` m, `u64` d,
    /// then `W` row-major, `b`, as little-endian `f64`, then `a` as `i8`.
    pub fn write_checkpoint(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(self.m as u64).to_le_bytes())?;
        out.write_all(&(self.d as u64).to_le_bytes())?;
        for v in self.w.iter().chain(&self.b) {
            out.write_all(&v.to_le_bytes())?;
        }
        let signs: Vec<u8> = self.a.iter().map(|&s| s as u8).collect();
        out.write_all(&signs)?;
        Ok(())
    }

    pub fn read_checkpoint(input: &mut impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut offset = 0usize;
        let mut take = |len: usize, what: &str| -> Result<&[u8]> {
            let end = offset + len;
            let out = bytes.get(offset..end).ok_or_else(|| Error::Format {
                offset: offset as u64,
                message: format!("checkpoint truncated while reading {what}"),
            })?;
            offset = end;
            Ok(out)
        };
        if take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Format { offset: 0, message: "bad checkpoint magic, expected `SNTK`".into() });
        }
        let version = u32::from_le_bytes(take(4, "version")?.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format { offset: 4, message: format!("unsupported checkpoint version {version}") });
        }
        let m = u64::from_le_bytes(take(8, "m")?.try_into().expect("8 bytes")) as usize;
        let d = u64::from_le_bytes(take(8, "d")?.try_into().expect("8 bytes")) as usize;
        let floats = m
            .checked_mul(d)
            .and_then(|md| md.checked_add(m))
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::Format { offset: 8, message: "checkpoint shape overflows".into() })?;
        let body = take(floats, "parameters")?;
        let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let a: Vec<i8> = take(m, "signs")?.iter().map(|&s| s as i8).collect();
        let trailing = bytes.len() - (24 + floats + m);
        if trailing != 0 {
            return Err(Error::Format {
                offset: (24 + floats + m) as u64,
                message: format!("{trailing} trailing bytes after checkpoint"),
            });
        }
        let (w, b) = values.split_at(m * d);
        Self::from_parts(d, w.to_vec(), b.to_vec(), a).map_err(|e| Error::Format {
            offset: 24,
            message: format!("invalid checkpoint contents: {e}"),
        })
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"SNTK";
const CHECKPOINT_VERSION: u32 = 1;

#[inline]
pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub(crate) fn half_squared_norm(v: &[f64]) -> f64 {
    0.5 * v.iter().map(|e| e * e).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_linear_teacher, DatasetMeta};

    fn unit_data(d: usize, n: usize, seed: u64) -> Dataset {
        gen_linear_teacher(d, n, RngStream::new(seed, 9)).unwrap()
    }

    #[test]
    fn standard_init_uses_constant_bias() {
        let model = ModelState::init(&InitScheme::standard(0.5, 1), 3, 4).unwrap();
        assert_eq!(model.biases(), &[0.5, 0.5, 0.5]);
        assert!(model.signs().iter().all(|s| s.abs() == 1));
    }

    #[test]
    fn symmetric_init_mirrors_halves() {
        let model = ModelState::init(&InitScheme::symmetric(0.0, 7), 2, 3).unwrap();
        assert_eq!(model.neurons(), 4);
        assert_eq!(model.weight_row(2), model.weight_row(0));
        assert_eq!(model.weight_row(3), model.weight_row(1));
        assert_eq!(model.signs()[2], -model.signs()[0]);
        assert_eq!(model.signs()[3], -model.signs()[1]);
    }

    #[test]
    fn init_is_deterministic() {
        let s = InitScheme::standard(1.0, 99);
        assert_eq!(ModelState::init(&s, 16, 5).unwrap(), ModelState::init(&s, 16, 5).unwrap());
    }

    #[test]
    fn single_neuron_forward() {
        let model = ModelState::from_parts(2, vec![1.0, 0.0], vec![0.0], vec![1]).unwrap();
        assert_eq!(model.forward(&[1.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(model.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_signs_rejected() {
        assert!(ModelState::from_parts(1, vec![1.0], vec![0.0], vec![0]).is_err());
    }

    #[test]
    fn mask_extremes() {
        let data = unit_data(4, 8, 1);
        let mut model = ModelState::init(&InitScheme::standard(0.0, 3), 32, 4).unwrap();
        model.b.iter_mut().for_each(|b| *b = 1e6);
        assert!(model.activation_mask(&data).unwrap().bits.iter().all(|&b| !b));
        let g = model.gradients(&data).unwrap();
        assert!(g.gw.iter().chain(&g.gb).all(|&v| v == 0.0));
        model.b.iter_mut().for_each(|b| *b = -1e6);
        assert!(model.activation_mask(&data).unwrap().bits.iter().all(|&b| b));
    }

    #[test]
    fn boundary_counts_as_active() {
        let model = ModelState::from_parts(1, vec![0.5], vec![0.5], vec![1]).unwrap();
        let data = Dataset::new(1, vec![1.0], vec![0.0], DatasetMeta::default()).unwrap();
        assert!(model.activation_mask(&data).unwrap().get(0, 0));
    }

    #[test]
    fn loss_of_symmetric_model_is_half_norm_of_y() {
        let data = unit_data(5, 16, 2);
        let model = ModelState::init(&InitScheme::symmetric(0.3, 5), 64, 5).unwrap();
        let want = 0.5 * data.y().iter().map(|v| v * v).sum::<f64>();
        assert!((model.loss(&data).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn param_distance_cases() {
        let model = ModelState::init(&InitScheme::standard(0.0, 3), 8, 3).unwrap();
        assert_eq!(model.param_distance(&model).unwrap(), Movement::default());
        let mut shifted = model.clone();
        shifted.b[4] += 0.3;
        let mv = shifted.param_distance(&model).unwrap();
        assert_eq!(mv.rw_max, 0.0);
        assert!((mv.rb_max - 0.3).abs() < 1e-15);
        assert!((mv.fro - 0.3).abs() < 1e-15);
        let other = ModelState::init(&InitScheme::standard(0.0, 3), 4, 3).unwrap();
        assert!(model.param_distance(&other).is_err());
    }

    #[test]
    fn checkpoint_round_trip_and_layout() {
        let model = ModelState::init(&InitScheme::standard(0.25, 4), 3, 2).unwrap();
        let mut buf = Vec::new();
        model.write_checkpoint(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SNTK");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 24 + 8 * (3 * 2 + 3) + 3);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), model.weights()[0]);
        let back = ModelState::read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn corrupted_checkpoints_are_format_errors() {
        let model = ModelState::init(&InitScheme::standard(0.25, 4), 3, 2).unwrap();
        let mut buf = Vec::new();
        model.write_checkpoint(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(ModelState::read_checkpoint(&mut bad.as_slice()), Err(Error::Format { offset: 0, .. })));
        let short = &buf[..buf.len() - 2];
        assert!(matches!(ModelState::read_checkpoint(&mut &short[..]), Err(Error::Format { .. })));
        let mut bad_sign = buf.clone();
        *bad_sign.last_mut().unwrap() = 3;
        assert!(matches!(ModelState::read_checkpoint(&mut bad_sign.as_slice()), Err(Error::Format { .. })));
    }
}
