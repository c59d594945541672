use std::io::Write;
use std::time::Instant;

use serde_json::json;
use sntk_core::train::{train, TrainConfig};

use super::{activation_drift, fraction_profile, load_dataset, load_model};
use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::OutputDir;
use crate::svg::{line_chart, Series};

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    let model = load_model(cfg, &data)?;
    let m = model.neurons();

    let start = Instant::now();
    let tc = TrainConfig::new(cfg.train.eta, cfg.train.steps).with_path(cfg.train.path);
    let (_, trace) = train(&model, &data, &tc)?;
    out.log(format!("sparsity: {} steps in {:.3}s", cfg.train.steps, start.elapsed().as_secs_f64()));

    let profile = fraction_profile(&trace, m);
    let drift = activation_drift(&trace);
    let limit = cfg.bounds.constants.activation_drift;
    let pass = drift <= limit;

    if cfg.output.wants(Format::Csv) {
        let mut w = out.create("sparsity.csv")?;
        writeln!(w, "step,mean_fraction,min_fraction,max_fraction")?;
        for (t, (mean, min, max)) in profile.iter().enumerate() {
            writeln!(w, "{t},{mean:?},{min:?},{max:?}")?;
        }
        w.flush()?;
    }
    if cfg.output.wants(Format::Json) {
        let summary = json!({
            "initial_fraction": profile[0].0,
            "final_fraction": profile[profile.len() - 1].0,
            "max_relative_drift": drift,
            "drift_limit": limit,
            "verdict": if pass { "pass" } else { "fail" },
            "steps": trace.steps(),
            "m": m,
            "B": cfg.model.bias,
        });
        out.write_json("summary.json", &summary)?;
    }
    if cfg.output.wants(Format::Svg) {
        let points = profile.iter().enumerate().map(|(t, p)| (t as f64, p.0)).collect();
        let series = [Series { name: "mean active fraction", points }];
        out.write_text("fraction.svg", &line_chart("Activation fraction", "step", "fraction", &series, false))?;
    }
    println!("sparsity: initial fraction {:.4}, max relative drift {drift:.4} (limit {limit})", profile[0].0);
    if pass {
        Ok(())
    } else {
        Err(CliError::Verdict(format!("activation drift {drift:.4} exceeds {limit}")))
    }
}
