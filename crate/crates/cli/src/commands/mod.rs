//! One module per subcommand. Each takes the loaded configuration and an
//! open output directory and returns `Ok(())` only when every check passed.

pub mod bench;
pub mod bounds;
pub mod ntk;
pub mod sparsity;
pub mod train;
pub mod verify;

use sntk_core::data::{gen_linear_teacher, gen_orthonormal, gen_separated, load_mnist_idx};
use sntk_core::ntk::{limiting_ntk_mc, limiting_ntk_quadrature};
use sntk_core::{Dataset, InitScheme, ModelState, RngStream, SymMatrix, TrainTrace};

use crate::config::{ExperimentConfig, Generator, NtkMethod};
use crate::error::CliError;

/// Jacobi tolerance for every eigenvalue the commands report.
pub const EIG_TOL: f64 = 1e-12;

/// Stream ids under the run seed.
const DATA_STREAM: u64 = 100;
const MC_STREAM: u64 = 200;
const REGION_STREAM: u64 = 300;

pub fn region_stream(cfg: &ExperimentConfig) -> RngStream {
    RngStream::new(cfg.seed, REGION_STREAM)
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let p = &cfg.dataset.params;
    let stream = RngStream::new(cfg.seed, DATA_STREAM);
    let paths = &cfg.dataset.paths;
    let data = match cfg.dataset.generator {
        Generator::LinearTeacher => gen_linear_teacher(p.d, p.n, stream)?,
        Generator::Orthonormal => gen_orthonormal(p.d, p.n, stream)?,
        Generator::Separated => gen_separated(p.d, p.n, p.min_sep, stream, p.max_tries)?,
        Generator::Mnist => {
            let (Some(images), Some(labels)) = (&paths.images, &paths.labels) else {
                return Err(CliError::Config("the mnist generator needs dataset.paths.images and dataset.paths.labels".into()));
            };
            load_mnist_idx(images, labels, p.limit, p.positive_class)?
        }
        Generator::Csv => {
            let Some(path) = &paths.csv else {
                return Err(CliError::Config("the csv generator needs dataset.paths.csv".into()));
            };
            Dataset::load_csv(path)?
        }
    };
    Ok(data)
}

/// Fresh initialization from the config, or the configured checkpoint.
pub fn load_model(cfg: &ExperimentConfig, data: &Dataset) -> Result<ModelState, CliError> {
    let model = match &cfg.model.checkpoint {
        Some(path) => ModelState::load_checkpoint(path)?,
        None => {
            let scheme = InitScheme { kind: cfg.model.init, bias: cfg.model.bias, seed: cfg.seed };
            ModelState::init(&scheme, cfg.init_width(), data.dim())?
        }
    };
    if model.dim() != data.dim() {
        return Err(CliError::Config(format!(
            "model input dimension {} does not match the dataset dimension {}",
            model.dim(),
            data.dim()
        )));
    }
    Ok(model)
}

pub fn limiting_kernel(cfg: &ExperimentConfig, data: &Dataset) -> Result<SymMatrix, CliError> {
    Ok(match cfg.ntk.method {
        NtkMethod::Quadrature => limiting_ntk_quadrature(data, cfg.model.bias)?,
        NtkMethod::MonteCarlo => {
            limiting_ntk_mc(data, cfg.model.bias, cfg.ntk.mc_samples, RngStream::new(cfg.seed, MC_STREAM))?
        }
    })
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Active fraction `|S_on(i, t)| / m` per step: (mean, min, max) over examples.
pub fn fraction_profile(trace: &TrainTrace, m: usize) -> Vec<(f64, f64, f64)> {
    trace
        .active_counts
        .iter()
        .map(|counts| {
            let frac = |c: u32| c as f64 / m as f64;
            let mean = counts.iter().map(|&c| frac(c)).sum::<f64>() / counts.len().max(1) as f64;
            let min = counts.iter().map(|&c| frac(c)).fold(f64::INFINITY, f64::min);
            let max = counts.iter().map(|&c| frac(c)).fold(0.0, f64::max);
            (mean, min, max)
        })
        .collect()
}

/// Largest relative change of any example's active count from its value at
/// step 0. An example with no active neurons at step 0 contributes 0 while
/// it stays inactive and 1 once anything switches on.
pub fn activation_drift(trace: &TrainTrace) -> f64 {
    let Some(initial) = trace.active_counts.first() else {
        return 0.0;
    };
    let mut drift: f64 = 0.0;
    for counts in &trace.active_counts {
        for (&c, &c0) in counts.iter().zip(initial) {
            let d = if c0 == 0 { (c > 0) as u8 as f64 } else { (c as f64 - c0 as f64).abs() / c0 as f64 };
            drift = drift.max(d);
        }
    }
    drift
}
