//! Full-batch gradient descent with a dense path and an active-set (sparse)
//! path, explicit-Euler gradient flow, and per-step instrumentation.
//!
//! The sparse path relies on one structural fact: a neuron that is inactive
//! on every example has zero gradient, so its parameters and therefore its
//! activation pattern cannot change. Only neurons in the active list are
//! evaluated, updated and rescanned. Both paths share the per-neuron
//! gradient kernel and reduce in the same index order, so they produce
//! bit-identical parameters.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{half_squared_norm, relu, ActivationMask, ModelState, Movement};
use crate::ntk::empirical_ntk_with_mask;
use crate::numerics::SymMatrix;

/// Training stops with [`Error::Divergence`] once the loss exceeds this
/// multiple of the initial loss.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Steps between full rescans that audit the incremental active-set index.
pub const AUDIT_INTERVAL: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPath {
    #[default]
    Dense,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrackFlags {
    pub flips: bool,
    pub ntk_snapshots: bool,
    pub masks: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub steps: usize,
    pub path: StepPath,
    pub track: TrackFlags,
    /// Snapshot period when `track.ntk_snapshots` is set.
    pub ntk_snapshot_every: usize,
}

impl TrainConfig {
    pub fn new(eta: f64, steps: usize) -> Self {
        Self { eta, steps, path: StepPath::Dense, track: TrackFlags::default(), ntk_snapshot_every: 0 }
    }

    pub fn with_path(mut self, path: StepPath) -> Self {
        self.path = path;
        self
    }

    pub fn with_flips(mut self) -> Self {
        self.track.flips = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidInput(format!("learning rate must be finite and nonnegative, got {}", self.eta)));
        }
        if self.track.ntk_snapshots && self.ntk_snapshot_every == 0 {
            return Err(Error::InvalidInput("ntk_snapshot_every must be positive when snapshots are tracked".into()));
        }
        Ok(())
    }
}

/// Cumulative flipped-neuron record: neuron `r` is in `S̄_i` once its
/// activation on example `i` has differed from its initial value at any
/// recorded step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlipRecord {
    /// `counts[t][i] = |S̄_i|` after observing steps `0..=t`.
    pub counts: Vec<Vec<u32>>,
    /// Final `S̄_i` as sorted neuron indices.
    pub sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSnapshot {
    pub step: usize,
    pub kernel: SymMatrix,
}

/// Everything recorded during a run. Index `t` refers to the state after
/// `t` updates, so every per-step vector has `steps + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub eta: f64,
    pub loss_history: Vec<f64>,
    /// `active_counts[t][i] = |S_on(i, t)|`.
    pub active_counts: Vec<Vec<u32>>,
    /// `rw_max` and `rb_max` are trajectory radii, the largest per-neuron
    /// distance from initialization over steps `0..=t`; `fro` is the
    /// distance at step `t` itself.
    pub movement: Vec<Movement>,
    /// `f(t) - y`.
    pub residuals: Vec<Vec<f64>>,
    pub flips: Option<FlipRecord>,
    pub snapshots: Vec<KernelSnapshot>,
    pub masks: Vec<ActivationMask>,
}

impl TrainTrace {
    fn new(eta: f64) -> Self {
        Self {
            eta,
            loss_history: Vec::new(),
            active_counts: Vec::new(),
            movement: Vec::new(),
            residuals: Vec::new(),
            flips: None,
            snapshots: Vec::new(),
            masks: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.loss_history.len().saturating_sub(1)
    }

    pub fn initial_loss(&self) -> f64 {
        self.loss_history[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("trace has the initial loss")
    }

    /// `||y - f(t)||^2` per recorded step.
    pub fn squared_residual_norms(&self) -> Vec<f64> {
        self.loss_history.iter().map(|l| 2.0 * l).collect()
    }

    /// Least-squares slope of `ln loss(t)` against `t` over the last
    /// `window` recorded steps.
    pub fn log_loss_slope(&self, window: usize) -> Option<f64> {
        let start = self.loss_history.len().checked_sub(window.max(2))?;
        let pts: Vec<(f64, f64)> = self.loss_history[start..]
            .iter()
            .enumerate()
            .map(|(k, l)| ((start + k) as f64, l.ln()))
            .collect();
        if pts.iter().any(|p| !p.1.is_finite()) {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    }

    /// Trace export: `step,loss,min_active,max_active,mean_active,rw_max,rb_max,fro`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "loss", "min_active", "max_active", "mean_active", "rw_max", "rb_max", "fro"])?;
        for (t, loss) in self.loss_history.iter().enumerate() {
            let counts = &self.active_counts[t];
            let min = counts.iter().copied().min().unwrap_or(0);
            let max = counts.iter().copied().max().unwrap_or(0);
            let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / counts.len().max(1) as f64;
            let mv = self.movement[t];
            w.write_record([
                t.to_string(),
                format!("{loss:?}"),
                min.to_string(),
                max.to_string(),
                format!("{mean:?}"),
                format!("{:?}", mv.rw_max),
                format!("{:?}", mv.rb_max),
                format!("{:?}", mv.fro),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-neuron activation counts over the training set plus the list of
/// neurons active on at least one example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSetIndex {
    counts: Vec<u32>,
    active: Vec<usize>,
    mask: ActivationMask,
}

impl ActiveSetIndex {
    /// Full scan of every neuron.
    pub fn build(model: &ModelState, data: &Dataset) -> Result<Self> {
        let mask = model.activation_mask(data)?;
        let counts: Vec<u32> =
            (0..mask.neurons()).map(|r| mask.row(r).iter().filter(|&&b| b).count() as u32).collect();
        let active = (0..counts.len()).filter(|&r| counts[r] >= 1).collect();
        Ok(Self { counts, active, mask })
    }

    /// Active neurons in ascending index order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn count(&self, r: usize) -> u32 {
        self.counts[r]
    }

    pub fn mask(&self) -> &ActivationMask {
        &self.mask
    }

    pub fn is_consistent(&self, model: &ModelState, data: &Dataset) -> Result<bool> {
        Ok(*self == Self::build(model, data)?)
    }

    fn rescan(&mut self, model: &ModelState, data: &Dataset, r: usize) {
        let n = data.len();
        let mut count = 0;
        let row = &mut self.mask.bits_mut()[r * n..(r + 1) * n];
        for (slot, x) in row.iter_mut().zip(data.columns()) {
            *slot = model.preactivation(r, x) >= 0.0;
            count += *slot as u32;
        }
        self.counts[r] = count;
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidInput(format!("learning rate must be positive and finite, got {eta}")));
    }
    Ok(())
}

/// Preactivations computed once for the residual and the mask.
fn dense_pass(model: &ModelState, data: &Dataset) -> Result<(Vec<f64>, ActivationMask)> {
    model.check_data(data)?;
    let n = data.len();
    let m = model.neurons();
    let mut acc = vec![0.0; n];
    let mut bits = Vec::with_capacity(m * n);
    for r in 0..m {
        let sign = model.signs()[r] as f64;
        for (i, x) in data.columns().enumerate() {
            let p = model.preactivation(r, x);
            acc[i] += sign * relu(p);
            bits.push(p >= 0.0);
        }
    }
    let scale = model.scale();
    let residual = acc.iter().zip(data.y()).map(|(a, y)| scale * a - y).collect();
    Ok((residual, ActivationMask::from_bits(m, n, bits)))
}

fn check_residual(residual: &[f64], step: usize) -> Result<f64> {
    let loss = half_squared_norm(residual);
    if !loss.is_finite() {
        return Err(Error::Divergence { step });
    }
    Ok(loss)
}

#[allow(clippy::too_many_arguments)]
fn apply_neuron_update(
    model: &mut ModelState,
    data: &Dataset,
    residual: &[f64],
    active: &[bool],
    r: usize,
    eta: f64,
    scratch: &mut [f64],
    step: usize,
) -> Result<()> {
    let gb = model.neuron_gradient(r, data, residual, active, scratch);
    if !gb.is_finite() || scratch.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence { step });
    }
    for (w, g) in model.weight_row_mut(r).iter_mut().zip(scratch.iter()) {
        *w -= eta * g;
    }
    *model.bias_mut(r) -= eta * gb;
    Ok(())
}

/// One dense update in place. Returns the pre-update residual and mask.
pub fn step_dense_in_place(
    model: &mut ModelState,
    data: &Dataset,
    eta: f64,
    step: usize,
) -> Result<(Vec<f64>, ActivationMask)> {
    let (residual, mask) = dense_pass(model, data)?;
    check_residual(&residual, step)?;
    let mut scratch = vec![0.0; model.dim()];
    for r in 0..model.neurons() {
        apply_neuron_update(model, data, &residual, mask.row(r), r, eta, &mut scratch, step)?;
    }
    Ok((residual, mask))
}

/// One active-set update in place. Returns the pre-update residual and
/// leaves `index` describing the updated model.
pub fn step_sparse_in_place(
    model: &mut ModelState,
    data: &Dataset,
    eta: f64,
    index: &mut ActiveSetIndex,
    step: usize,
) -> Result<Vec<f64>> {
    model.check_data(data)?;
    let n = data.len();
    if index.mask.neurons() != model.neurons() || index.mask.examples() != n {
        return Err(Error::Internal("active-set index shape does not match the model and dataset".into()));
    }
    let mut acc = vec![0.0; n];
    for &r in &index.active {
        let sign = model.signs()[r] as f64;
        let row = index.mask.row(r);
        for (i, x) in data.columns().enumerate() {
            let p = model.preactivation(r, x);
            if (p >= 0.0) != row[i] {
                return Err(Error::Internal(format!("stale active-set index at neuron {r}, example {i}")));
            }
            acc[i] += sign * relu(p);
        }
    }
    let scale = model.scale();
    let residual: Vec<f64> = acc.iter().zip(data.y()).map(|(a, y)| scale * a - y).collect();
    check_residual(&residual, step)?;

    let mut scratch = vec![0.0; model.dim()];
    for k in 0..index.active.len() {
        let r = index.active[k];
        apply_neuron_update(model, data, &residual, index.mask.row(r), r, eta, &mut scratch, step)?;
    }
    let previously_active = std::mem::take(&mut index.active);
    for &r in &previously_active {
        index.rescan(model, data, r);
    }
    index.active = previously_active.into_iter().filter(|&r| index.counts[r] >= 1).collect();
    Ok(residual)
}

/// `[W, b] <- [W, b] - eta * grad L`, returning a new state.
pub fn gd_step_dense(model: &ModelState, data: &Dataset, eta: f64) -> Result<ModelState> {
    check_eta(eta)?;
    let mut next = model.clone();
    step_dense_in_place(&mut next, data, eta, 0)?;
    Ok(next)
}

/// Same update as [`gd_step_dense`], touching only active neurons.
pub fn gd_step_sparse(
    model: &ModelState,
    data: &Dataset,
    eta: f64,
    index: &ActiveSetIndex,
) -> Result<(ModelState, ActiveSetIndex)> {
    check_eta(eta)?;
    let mut next = model.clone();
    let mut idx = index.clone();
    step_sparse_in_place(&mut next, data, eta, &mut idx, 0)?;
    Ok((next, idx))
}

struct Recorder<'a> {
    cfg: &'a TrainConfig,
    data: &'a Dataset,
    initial_mask: Option<ActivationMask>,
    flipped: Vec<bool>,
    flip_counts: Vec<u32>,
    trace: TrainTrace,
}

impl Recorder<'_> {
    fn observe_state(&mut self, t: usize, mut movement: Movement, mask: &ActivationMask) {
        let n = mask.examples();
        if let Some(prev) = self.trace.movement.last() {
            movement.rw_max = movement.rw_max.max(prev.rw_max);
            movement.rb_max = movement.rb_max.max(prev.rb_max);
        }
        self.trace.active_counts.push(mask.column_counts().into_iter().map(|c| c as u32).collect());
        self.trace.movement.push(movement);
        if self.cfg.track.flips {
            let init = self.initial_mask.get_or_insert_with(|| mask.clone());
            for r in 0..mask.neurons() {
                for i in 0..n {
                    let k = r * n + i;
                    if !self.flipped[k] && mask.get(r, i) != init.get(r, i) {
                        self.flipped[k] = true;
                        self.flip_counts[i] += 1;
                    }
                }
            }
            self.trace.flips.get_or_insert_with(FlipRecord::default).counts.push(self.flip_counts.clone());
        }
        if self.cfg.track.ntk_snapshots && t.is_multiple_of(self.cfg.ntk_snapshot_every) {
            let kernel = empirical_ntk_with_mask(self.data, mask);
            self.trace.snapshots.push(KernelSnapshot { step: t, kernel });
        }
        if self.cfg.track.masks {
            self.trace.masks.push(mask.clone());
        }
    }

    fn observe_residual(&mut self, t: usize, residual: Vec<f64>) -> Result<()> {
        let loss = check_residual(&residual, t)?;
        if let Some(&initial) = self.trace.loss_history.first() {
            if loss > DIVERGENCE_FACTOR * initial.max(f64::MIN_POSITIVE) {
                return Err(Error::Divergence { step: t });
            }
        }
        self.trace.loss_history.push(loss);
        self.trace.residuals.push(residual);
        Ok(())
    }

    fn finish(mut self, m: usize, n: usize) -> TrainTrace {
        if let Some(flips) = self.trace.flips.as_mut() {
            flips.sets = (0..n).map(|i| (0..m).filter(|&r| self.flipped[r * n + i]).collect()).collect();
        }
        self.trace
    }
}

/// Runs `cfg.steps` full-batch steps from `model` and records the trace.
/// A zero learning rate is accepted and leaves the model unchanged.
pub fn train(model: &ModelState, data: &Dataset, cfg: &TrainConfig) -> Result<(ModelState, TrainTrace)> {
    cfg.validate()?;
    model.check_data(data)?;
    let (m, n) = (model.neurons(), data.len());
    let mut rec = Recorder {
        cfg,
        data,
        initial_mask: None,
        flipped: if cfg.track.flips { vec![false; m * n] } else { Vec::new() },
        flip_counts: vec![0; n],
        trace: TrainTrace::new(cfg.eta),
    };
    let mut state = model.clone();
    match cfg.path {
        StepPath::Dense => {
            for t in 0..cfg.steps {
                let movement = state.param_distance(model)?;
                let (residual, mask) = step_dense_in_place(&mut state, data, cfg.eta, t)?;
                rec.observe_state(t, movement, &mask);
                rec.observe_residual(t, residual)?;
            }
            let (residual, mask) = dense_pass(&state, data)?;
            rec.observe_state(cfg.steps, state.param_distance(model)?, &mask);
            rec.observe_residual(cfg.steps, residual)?;
        }
        StepPath::Sparse => {
            let mut index = ActiveSetIndex::build(&state, data)?;
            for t in 0..cfg.steps {
                rec.observe_state(t, state.param_distance(model)?, index.mask());
                let residual = step_sparse_in_place(&mut state, data, cfg.eta, &mut index, t)?;
                rec.observe_residual(t, residual)?;
                if (t + 1) % AUDIT_INTERVAL == 0 && !index.is_consistent(&state, data)? {
                    return Err(Error::Internal(format!("active-set index drifted from a full rescan at step {}", t + 1)));
                }
            }
            rec.observe_state(cfg.steps, state.param_distance(model)?, index.mask());
            rec.observe_residual(cfg.steps, state.residuals(data)?)?;
        }
    }
    Ok((state, rec.finish(m, n)))
}

/// Explicit Euler integration of the gradient flow `d[W,b]/dt = -grad L`
/// with step `dt` up to time `horizon`. Node `k` of the returned trace is
/// time `k * dt`; one node with `dt = eta` is exactly one GD step.
pub fn gradient_flow_euler(model: &ModelState, data: &Dataset, dt: f64, horizon: f64) -> Result<(ModelState, TrainTrace)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if !(horizon >= dt) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon {horizon} must be at least the time step {dt}")));
    }
    let steps = (horizon / dt - 1e-9).ceil() as usize;
    train(model, data, &TrainConfig::new(dt, steps))
}

/// Sizes of the flipped sets at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipStats {
    pub per_example: Vec<usize>,
    pub max: usize,
    /// `max / m`.
    pub max_fraction: f64,
}

pub fn flipped_statistics(trace: &TrainTrace, m: usize) -> Result<FlipStats> {
    let flips = trace.flips.as_ref().ok_or(Error::MissingData("flip tracking was disabled for this run"))?;
    let per_example: Vec<usize> = flips.sets.iter().map(Vec::len).collect();
    let max = per_example.iter().copied().max().unwrap_or(0);
    Ok(FlipStats { max_fraction: max as f64 / m.max(1) as f64, per_example, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_linear_teacher;
    use crate::model::InitScheme;
    use crate::numerics::RngStream;

    fn setup(m: usize, bias: f64, n: usize, seed: u64) -> (ModelState, Dataset) {
        let data = gen_linear_teacher(5, n, RngStream::new(seed, 100)).unwrap();
        let model = ModelState::init(&InitScheme::standard(bias, seed), m, 5).unwrap();
        (model, data)
    }

    #[test]
    fn zero_residual_leaves_state_unchanged() {
        let (model, data) = setup(64, 0.0, 8, 1);
        let fitted = data.with_responses(model.outputs(&data).unwrap()).unwrap();
        let next = gd_step_dense(&model, &fitted, 0.5).unwrap();
        assert_eq!(next, model);
    }

    #[test]
    fn dense_step_is_model_minus_eta_gradients() {
        let (model, data) = setup(128, 0.5, 12, 2);
        let eta = 0.3;
        let grads = model.gradients(&data).unwrap();
        let next = gd_step_dense(&model, &data, eta).unwrap();
        for r in 0..model.neurons() {
            for k in 0..model.dim() {
                let want = model.weight_row(r)[k] - eta * grads.weight_row(r)[k];
                assert!((next.weight_row(r)[k] - want).abs() <= 1e-14);
            }
            assert!((next.biases()[r] - (model.biases()[r] - eta * grads.gb[r])).abs() <= 1e-14);
        }
        assert_eq!(next.signs(), model.signs());
    }

    #[test]
    fn rejects_bad_learning_rate() {
        let (model, data) = setup(8, 0.0, 4, 3);
        assert!(gd_step_dense(&model, &data, 0.0).is_err());
        assert!(gd_step_dense(&model, &data, f64::NAN).is_err());
    }

    #[test]
    fn all_inactive_sparse_step_is_a_no_op() {
        let (model, data) = setup(32, 1e6, 8, 4);
        let index = ActiveSetIndex::build(&model, &data).unwrap();
        assert!(index.active().is_empty());
        let (next, next_index) = gd_step_sparse(&model, &data, 0.1, &index).unwrap();
        assert_eq!(next, model);
        assert!(next_index.active().is_empty());
    }

    #[test]
    fn sparse_matches_dense_bitwise() {
        for (bias, seed) in [(0.0, 5), (1.0, 6), (2.0, 7)] {
            let (model, data) = setup(512, bias, 16, seed);
            let mut dense = model.clone();
            let mut sparse = model.clone();
            let mut index = ActiveSetIndex::build(&model, &data).unwrap();
            for t in 0..20 {
                step_dense_in_place(&mut dense, &data, 0.5, t).unwrap();
                step_sparse_in_place(&mut sparse, &data, 0.5, &mut index, t).unwrap();
                assert_eq!(dense, sparse, "bias {bias}, step {t}");
            }
            assert!(index.is_consistent(&sparse, &data).unwrap());
        }
    }

    #[test]
    fn stale_index_is_detected() {
        let (model, data) = setup(64, 0.0, 8, 8);
        let index = ActiveSetIndex::build(&model, &data).unwrap();
        let moved = gd_step_dense(&model, &data, 5.0).unwrap();
        let mut shifted = moved.clone();
        // Push an active neuron far below threshold without telling the index.
        let r = index.active()[0];
        *shifted.bias_mut(r) = 1e6;
        assert!(matches!(gd_step_sparse(&shifted, &data, 0.1, &index), Err(Error::Internal(_))));
    }

    #[test]
    fn active_list_at_high_bias() {
        // m = 8192, B = 2: at most 2 m exp(-B^2 / 2) neurons fire on any example.
        let (model, data) = setup(8192, 2.0, 16, 9);
        let index = ActiveSetIndex::build(&model, &data).unwrap();
        let bound = 2.0 * 8192.0 * (-2.0f64).exp();
        assert!((index.active().len() as f64) <= bound, "{} active", index.active().len());
        for r in 0..model.neurons() {
            assert_eq!(index.count(r) >= 1, index.active().binary_search(&r).is_ok());
        }
    }

    #[test]
    fn zero_steps_records_initial_loss_only() {
        let (model, data) = setup(32, 0.0, 8, 10);
        let (out, trace) = train(&model, &data, &TrainConfig::new(0.1, 0).with_flips()).unwrap();
        assert_eq!(out, model);
        assert_eq!(trace.loss_history, vec![model.loss(&data).unwrap()]);
        let stats = flipped_statistics(&trace, 32).unwrap();
        assert!(stats.per_example.iter().all(|&c| c == 0));
    }

    #[test]
    fn zero_learning_rate_never_flips() {
        let (model, data) = setup(64, 0.5, 8, 11);
        let (out, trace) = train(&model, &data, &TrainConfig::new(0.0, 5).with_flips()).unwrap();
        assert_eq!(out, model);
        assert_eq!(flipped_statistics(&trace, 64).unwrap().max, 0);
    }

    #[test]
    fn missing_flip_tracking_is_reported() {
        let (model, data) = setup(16, 0.0, 4, 12);
        let (_, trace) = train(&model, &data, &TrainConfig::new(0.1, 2)).unwrap();
        assert!(matches!(flipped_statistics(&trace, 16), Err(Error::MissingData(_))));
    }

    #[test]
    fn sparse_and_dense_traces_agree() {
        let (model, data) = setup(256, 1.0, 12, 13);
        let cfg = TrainConfig::new(0.5, 120).with_flips();
        let (a, ta) = train(&model, &data, &cfg).unwrap();
        let (b, tb) = train(&model, &data, &cfg.with_path(StepPath::Sparse)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(ta.loss_history.len(), 121);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let (model, data) = setup(64, 0.0, 8, 14);
        match train(&model, &data, &TrainConfig::new(1e4, 50)) {
            Err(Error::Divergence { step }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn euler_single_node_is_a_gd_step() {
        let (model, data) = setup(64, 0.0, 8, 15);
        let (flowed, trace) = gradient_flow_euler(&model, &data, 0.2, 0.2).unwrap();
        assert_eq!(flowed, gd_step_dense(&model, &data, 0.2).unwrap());
        assert_eq!(trace.loss_history.len(), 2);
        assert!(gradient_flow_euler(&model, &data, 0.2, 0.1).is_err());
    }

    #[test]
    fn trace_csv_shape() {
        let (model, data) = setup(32, 0.0, 6, 16);
        let (_, trace) = train(&model, &data, &TrainConfig::new(0.1, 3)).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,loss,min_active,max_active,mean_active,rw_max,rb_max,fro");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,"));
    }
}
