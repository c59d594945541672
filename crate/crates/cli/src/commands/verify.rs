use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;
use sntk_core::ntk::{empirical_ntk, feature_matrix_z, limiting_ntk_mc, limiting_ntk_quadrature, pair_activation_probability};
use sntk_core::train::{train, StepPath, TrainConfig};
use sntk_core::{Dataset, ModelState, RngStream};

use super::{load_dataset, load_model};
use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::OutputDir;

/// Steps compared between the dense and sparse paths.
const EQUIVALENCE_STEPS: usize = 50;
/// Neurons probed by finite differences.
const FD_NEURONS: usize = 32;
const FD_STEP: f64 = 1e-5;
/// Monte Carlo samples used when the config does not ask for more.
const MIN_MC_SAMPLES: usize = 20_000;

#[derive(Debug, Serialize)]
struct Check {
    check: &'static str,
    measured: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn at_most(check: &'static str, measured: f64, tolerance: f64) -> Self {
        Self { check, measured, tolerance, pass: measured <= tolerance }
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn z_factorization(model: &ModelState, data: &Dataset) -> Result<Check, CliError> {
    let h = empirical_ntk(model, data)?;
    let g = feature_matrix_z(model, data)?.gram();
    Ok(Check::at_most("z_factorization", max_gap(h.as_slice(), g.as_slice()), 1e-10))
}

fn sparse_dense(cfg: &ExperimentConfig, model: &ModelState, data: &Dataset) -> Result<Check, CliError> {
    let tc = TrainConfig::new(cfg.train.eta, cfg.train.steps.min(EQUIVALENCE_STEPS));
    let dense = train(model, data, &tc);
    let sparse = train(model, data, &tc.with_path(StepPath::Sparse));
    let gap = match (dense, sparse) {
        (Ok((a, _)), Ok((b, _))) => max_gap(&a.param_vec(), &b.param_vec()),
        (Err(a), Err(b)) if a.to_string() == b.to_string() => 0.0,
        _ => f64::INFINITY,
    };
    Ok(Check::at_most("sparse_dense", gap, 1e-12))
}

/// Central differences on the first neurons, skipping any neuron with a
/// preactivation near its kink.
fn finite_differences(model: &ModelState, data: &Dataset) -> Result<Check, CliError> {
    let d = model.dim();
    let analytic = model.gradients(data)?.to_vec();
    let params = model.param_vec();
    let mut worst: f64 = 0.0;
    for r in 0..model.neurons().min(FD_NEURONS) {
        let margin = data.columns().map(|x| model.preactivation(r, x).abs()).fold(f64::INFINITY, f64::min);
        if margin <= 10.0 * FD_STEP {
            continue;
        }
        for k in 0..=d {
            let idx = r * (d + 1) + k;
            let loss_at = |delta: f64| -> Result<f64, CliError> {
                let mut p = params.clone();
                p[idx] += delta;
                let (mut w, mut b) = (Vec::with_capacity(model.neurons() * d), Vec::with_capacity(model.neurons()));
                for row in p.chunks(d + 1) {
                    w.extend_from_slice(&row[..d]);
                    b.push(row[d]);
                }
                Ok(ModelState::from_parts(d, w, b, model.signs().to_vec())?.loss(data)?)
            };
            let fd = (loss_at(FD_STEP)? - loss_at(-FD_STEP)?) / (2.0 * FD_STEP);
            let g = analytic[idx];
            let scale = g.abs().max(fd.abs());
            // Gradients at roundoff level carry no relative information.
            if scale > 1e-9 {
                worst = worst.max((fd - g).abs() / scale);
            }
        }
    }
    Ok(Check::at_most("gradient_finite_differences", worst, 1e-5))
}

/// Every entry `(c + 1) p_hat` has variance at most `1 / S`.
fn quadrature_vs_mc(cfg: &ExperimentConfig, data: &Dataset) -> Result<Check, CliError> {
    let samples = cfg.ntk.mc_samples.max(MIN_MC_SAMPLES);
    let quad = limiting_ntk_quadrature(data, cfg.model.bias)?;
    let mc = limiting_ntk_mc(data, cfg.model.bias, samples, RngStream::new(cfg.seed, 210))?;
    Ok(Check::at_most("quadrature_vs_monte_carlo", max_gap(quad.as_slice(), mc.as_slice()), 5.0 / (samples as f64).sqrt()))
}

fn closed_form() -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for k in 0..=200 {
        let c = -1.0 + 0.01 * k as f64;
        let exact = (PI - c.acos()) / (2.0 * PI);
        worst = worst.max((pair_activation_probability(c, 0.0)? - exact).abs());
    }
    Ok(Check::at_most("pair_probability_closed_form", worst, 1e-12))
}

fn checkpoint_round_trip(model: &ModelState, out: &OutputDir) -> Result<Check, CliError> {
    let path = out.path("verify_checkpoint.bin");
    model.save_checkpoint(&path)?;
    let back = ModelState::load_checkpoint(&path)?;
    std::fs::remove_file(&path)?;
    let gap = if back.signs() == model.signs() { max_gap(&back.param_vec(), &model.param_vec()) } else { f64::INFINITY };
    Ok(Check::at_most("checkpoint_round_trip", gap, 0.0))
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    let model = load_model(cfg, &data)?;
    let checks = vec![
        z_factorization(&model, &data)?,
        sparse_dense(cfg, &model, &data)?,
        finite_differences(&model, &data)?,
        quadrature_vs_mc(cfg, &data)?,
        closed_form()?,
        checkpoint_round_trip(&model, out)?,
    ];
    if cfg.output.wants(Format::Csv) {
        let mut w = out.create("verify.csv")?;
        writeln!(w, "check,measured,tolerance,verdict")?;
        for c in &checks {
            writeln!(w, "{},{:?},{:?},{}", c.check, c.measured, c.tolerance, if c.pass { "pass" } else { "fail" })?;
        }
        w.flush()?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_json("verify.json", &checks)?;
    }
    for c in &checks {
        println!("verify: [{}] {} {:.3e} (tolerance {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.check, c.measured, c.tolerance);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.check).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verdict(format!("failed checks: {}", failed.join(", "))))
    }
}
