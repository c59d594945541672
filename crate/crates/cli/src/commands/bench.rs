use std::time::{Duration, Instant};

use serde_json::json;
use sntk_core::train::{step_dense_in_place, step_sparse_in_place, ActiveSetIndex};
use sntk_core::{Dataset, ModelState};

use super::{load_dataset, load_model};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::OutputDir;

const REPEATS: usize = 5;

/// Best-of-`REPEATS` time for one update from `model`.
fn time_step(model: &ModelState, data: &Dataset, eta: f64, index: Option<&ActiveSetIndex>) -> Result<Duration, CliError> {
    let mut best = Duration::MAX;
    for _ in 0..REPEATS {
        let mut state = model.clone();
        let mut idx = index.cloned();
        let start = Instant::now();
        match idx.as_mut() {
            Some(idx) => {
                step_sparse_in_place(&mut state, data, eta, idx, 0)?;
            }
            None => {
                step_dense_in_place(&mut state, data, eta, 0)?;
            }
        }
        best = best.min(start.elapsed());
    }
    Ok(best)
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    let model = load_model(cfg, &data)?;
    let eta = cfg.train.eta;
    let index = ActiveSetIndex::build(&model, &data)?;

    let mut dense = model.clone();
    step_dense_in_place(&mut dense, &data, eta, 0)?;
    let mut sparse = model.clone();
    step_sparse_in_place(&mut sparse, &data, eta, &mut index.clone(), 0)?;
    if dense != sparse {
        return Err(CliError::Verdict("dense and sparse updates disagree; timings not taken".into()));
    }

    let dense_t = time_step(&model, &data, eta, None)?;
    let sparse_t = time_step(&model, &data, eta, Some(&index))?;
    let speedup = dense_t.as_secs_f64() / sparse_t.as_secs_f64().max(1e-12);
    let active_fraction = model.activation_mask(&data)?.density();
    let result = json!({
        "m": model.neurons(),
        "n": data.len(),
        "B": cfg.model.bias,
        "active_fraction": active_fraction,
        "active_neurons": index.active().len(),
        "dense_ns": dense_t.as_nanos() as u64,
        "sparse_ns": sparse_t.as_nanos() as u64,
        "speedup": speedup,
    });
    out.write_json("bench.json", &result)?;
    out.log(format!("bench: dense {dense_t:?}, sparse {sparse_t:?}"));
    println!(
        "bench: m {} active fraction {active_fraction:.4}, dense {dense_t:?}, sparse {sparse_t:?}, speedup {speedup:.2}x",
        model.neurons()
    );
    Ok(())
}
