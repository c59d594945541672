use std::time::Instant;

use serde_json::json;
use sntk_core::ntk::empirical_ntk;
use sntk_core::train::{train, TrainConfig};

use super::{load_dataset, load_model, EIG_TOL};
use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::OutputDir;
use crate::svg::{line_chart, Series};

/// Fraction of the run used to fit the terminal log-loss slope.
const SLOPE_FRACTION: usize = 5;

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    let model = load_model(cfg, &data)?;
    let lambda_hat = empirical_ntk(&model, &data)?.smallest_eigenvalue(EIG_TOL)?;

    let start = Instant::now();
    let tc = TrainConfig::new(cfg.train.eta, cfg.train.steps).with_path(cfg.train.path);
    let (trained, trace) = train(&model, &data, &tc)?;
    out.log(format!("train: {} steps in {:.3}s", cfg.train.steps, start.elapsed().as_secs_f64()));

    trained.save_checkpoint(out.path("checkpoint.bin"))?;
    if cfg.output.wants(Format::Csv) {
        trace.write_csv(out.create("trace.csv")?)?;
    }
    let window = (trace.steps() / SLOPE_FRACTION).max(2);
    let summary = json!({
        "initial_loss": trace.initial_loss(),
        "final_loss": trace.final_loss(),
        "fitted_log_rate": trace.log_loss_slope(window),
        "slope_window": window,
        "lambda_hat": lambda_hat,
        "steps": trace.steps(),
        "eta": cfg.train.eta,
        "m": trained.neurons(),
        "n": data.len(),
        "B": cfg.model.bias,
        "seed": cfg.seed,
    });
    if cfg.output.wants(Format::Json) {
        out.write_json("summary.json", &summary)?;
    }
    if cfg.output.wants(Format::Svg) {
        let points = trace.loss_history.iter().enumerate().map(|(t, &l)| (t as f64, l)).collect();
        let series = [Series { name: &format!("B = {}", cfg.model.bias), points }];
        out.write_text("loss.svg", &line_chart("Training loss", "step", "loss", &series, true))?;
    }
    println!(
        "train: loss {:.6e} -> {:.6e} over {} steps, lambda_hat {lambda_hat:.6e}",
        trace.initial_loss(),
        trace.final_loss(),
        trace.steps()
    );
    Ok(())
}
