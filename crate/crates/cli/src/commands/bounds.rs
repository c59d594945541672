use std::f64::consts::SQRT_2;
use std::io::Write;
use std::time::Instant;

use sntk_core::ntk::{empirical_ntk, feature_matrix_z, pair_prob_matrix};
use sntk_core::theory::{
    activated_count_bound, data_separation, error_dynamics_residual, flipping_prob_bound, flipping_prob_exact,
    generalization_bound, generalization_remainder, initial_error_bound, lambda0_profile, movement_bound,
    rademacher_leading_term, relative_spread, restricted_eig_lower_bound, restricted_min_eig_estimate, BoundEntry,
    BoundsReport, RegionSpec,
};
use sntk_core::train::{flipped_statistics, train, TrainConfig};
use sntk_core::{Dataset, Error, InitKind, ModelState, SymMatrix, TrainTrace};

use super::ntk::KernelComparison;
use super::{activation_drift, limiting_kernel, load_dataset, load_model, norm, region_stream, EIG_TOL};
use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::OutputDir;

/// Entries that need a completed training run.
const TRAINED_KEYS: [&str; 7] = [
    "flipping_prob",
    "flipped_neurons",
    "movement_dw",
    "movement_db",
    "convergence_rate",
    "error_dynamics",
    "activation_stability",
];

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a Dataset,
    model: &'a ModelState,
    hinf: &'a SymMatrix,
    lambda_hat: f64,
}

impl Context<'_> {
    fn bias(&self) -> f64 {
        self.cfg.model.bias
    }

    fn decay(&self) -> f64 {
        (-0.5 * self.bias() * self.bias()).exp()
    }
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    let model = load_model(cfg, &data)?;
    let h0 = empirical_ntk(&model, &data)?;
    let hinf = limiting_kernel(cfg, &data)?;
    let lambda_hat = h0.smallest_eigenvalue(EIG_TOL)?;
    let ctx = Context { cfg, data: &data, model: &model, hinf: &hinf, lambda_hat };

    let mut report = BoundsReport::default();
    KernelComparison::measure(cfg, &h0, &hinf, model.neurons())?.record(cfg, data.len(), model.neurons(), &mut report);
    initial_entries(&ctx, &mut report)?;
    structure_entries(&ctx, &mut report)?;

    let start = Instant::now();
    let tc = TrainConfig::new(cfg.train.eta, cfg.train.steps).with_path(cfg.train.path).with_flips();
    match train(&model, &data, &tc) {
        Ok((_, trace)) => trained_entries(&ctx, &trace, &mut report)?,
        Err(Error::Divergence { step }) => {
            for key in TRAINED_KEYS {
                report.insert(key, BoundEntry::new(instantiates(key)).fail().note(format!("training diverged at step {step}")));
            }
        }
        Err(e) => return Err(e.into()),
    }
    out.log(format!("bounds: training and evaluation in {:.3}s", start.elapsed().as_secs_f64()));

    out.write_json("report.json", &report)?;
    if cfg.output.wants(Format::Csv) {
        let mut w = out.create("report.csv")?;
        writeln!(w, "key,instantiates,bound,measured,verdict")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for (key, e) in &report.entries {
            writeln!(w, "{key},{},{},{},{}", e.instantiates, opt(e.bound), opt(e.measured), e.verdict)?;
        }
        w.flush()?;
    }
    for (key, e) in &report.entries {
        println!("bounds: {key:<22} {}", e.verdict);
    }
    match report.failures().as_slice() {
        [] => Ok(()),
        failed => Err(CliError::Verdict(format!("failed bounds: {}", failed.join(", ")))),
    }
}

fn instantiates(key: &str) -> &'static str {
    match key {
        "flipping_prob" => "bound_flipping",
        "flipped_neurons" => "num_flipped_neurons",
        "movement_dw" | "movement_db" => "weight_bias_movement",
        "convergence_rate" => "convergence",
        "error_dynamics" => "error_dynamics",
        "activation_stability" => "sparsity_stability",
        _ => "unknown",
    }
}

fn initial_entries(ctx: &Context, report: &mut BoundsReport) -> Result<(), CliError> {
    let (n, m, bias) = (ctx.data.len(), ctx.model.neurons(), ctx.bias());
    let mask = ctx.model.activation_mask(ctx.data)?;
    let most = mask.column_counts().into_iter().max().unwrap_or(0) as f64;
    report.insert(
        "activated_count",
        BoundEntry::new("activated_neurons")
            .input("m", m as f64)
            .input("B", bias)
            .upper(activated_count_bound(m, bias), most),
    );

    let z = feature_matrix_z(ctx.model, ctx.data)?;
    report.insert(
        "z_fro_init",
        BoundEntry::new("z_fro_init")
            .input("n", n as f64)
            .input("B", bias)
            .upper(8.0 * n as f64 * ctx.decay(), z.frobenius_norm().powi(2))
            .note("squared Frobenius norm of Z(0)"),
    );

    let residual = norm(&ctx.model.residuals(ctx.data)?);
    let c = ctx.cfg.bounds.constants.initial_error;
    report.insert(
        "initial_error",
        BoundEntry::new("initial_error")
            .input("n", n as f64)
            .input("m", m as f64)
            .input("B", bias)
            .input("delta", ctx.cfg.bounds.delta)
            .input("C", c)
            .upper(initial_error_bound(n, m, bias, ctx.cfg.bounds.delta, c)?, residual * residual),
    );
    Ok(())
}

fn structure_entries(ctx: &Context, report: &mut BoundsReport) -> Result<(), CliError> {
    let (n, bias) = (ctx.data.len(), ctx.bias());
    let y = ctx.data.y();

    let restricted = BoundEntry::new("restricted_least_eigenvalue").input("B", bias);
    let restricted = if n < 2 {
        restricted.note("needs at least two examples")
    } else {
        let sep = data_separation(ctx.data)?.min(SQRT_2);
        let lower = restricted_eig_lower_bound(bias, sep)?;
        let region = RegionSpec::new(pair_prob_matrix(ctx.data, bias)?)?;
        let samples = ctx.cfg.bounds.region_samples;
        let est = restricted_min_eig_estimate(ctx.hinf, &region, samples, region_stream(ctx.cfg))?;
        restricted.input("delta_sep", sep).input("samples", samples as f64).lower(lower, est)
    };
    report.insert("restricted_eig_lower", restricted);

    let entry = |key: &str, f: &dyn Fn() -> sntk_core::Result<f64>| {
        let e = BoundEntry::new(key).input("n", n as f64).input("B", bias);
        match f() {
            Ok(v) => e.value(v),
            Err(err) => e.note(err.to_string()),
        }
    };
    report.insert(
        "generalization",
        entry("population_loss", &|| generalization_bound(ctx.hinf, y, bias, n))
            .input("remainder", generalization_remainder(n)),
    );
    report.insert("rademacher", entry("rademacher_complexity_fixed_R", &|| rademacher_leading_term(ctx.hinf, y, bias, n)));

    let mut biases = vec![0.0, 0.5, 1.0];
    if !biases.contains(&bias) {
        biases.push(bias);
    }
    let profile = lambda0_profile(ctx.data, &biases, EIG_TOL)?;
    let mut stability = BoundEntry::new("lambda_scaling");
    for (b, l) in biases.iter().zip(&profile) {
        stability = stability.input(&format!("lambda0(B={b})"), *l);
    }
    stability = match relative_spread(&profile) {
        Some(s) => stability.measured(s).note("relative spread of lambda_min(H_inf(B)) e^{B^2/2}"),
        None => stability.note("limiting kernel is singular at some bias"),
    };
    report.insert("lambda0_stability", stability);
    Ok(())
}

fn trained_entries(ctx: &Context, trace: &TrainTrace, report: &mut BoundsReport) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let (n, m, bias, eta) = (ctx.data.len(), ctx.model.neurons(), ctx.bias(), cfg.train.eta);
    let mv = *trace.movement.last().expect("trace holds the initial state");
    let (rw, rb) = (mv.rw_max, mv.rb_max);
    let c = cfg.bounds.constants.flip;

    let flip = BoundEntry::new("bound_flipping").input("Rw", rw).input("Rb", rb).input("B", bias).input("c", c);
    let flip = match flipping_prob_bound(rw, rb, bias, c) {
        Ok(bound) => flip.upper(bound, flipping_prob_exact(rw, rb, bias)?),
        Err(Error::Domain(msg)) => flip.note(msg),
        Err(e) => return Err(e.into()),
    };
    report.insert("flipping_prob", flip);

    let stats = flipped_statistics(trace, m)?;
    report.insert(
        "flipped_neurons",
        BoundEntry::new("num_flipped_neurons")
            .input("Rw", rw)
            .input("Rb", rb)
            .input("B", bias)
            .input("c", c)
            .upper(2.0 * c * (rw + rb) * ctx.decay(), stats.max_fraction)
            .note("largest flipped-set size over m"),
    );

    let residual0 = norm(&trace.residuals[0]);
    let lam = 0.75 * ctx.lambda_hat;
    let movement = |measured: f64| {
        let e = BoundEntry::new("weight_bias_movement")
            .input("n", n as f64)
            .input("m", m as f64)
            .input("residual_norm", residual0)
            .input("lambda", lam);
        match movement_bound(n, residual0, m, lam) {
            Ok(bound) => e.upper(bound, measured),
            Err(err) => e.measured(measured).note(err.to_string()),
        }
    };
    report.insert("movement_dw", movement(rw));
    report.insert("movement_db", movement(rb));

    let t = trace.steps();
    let base = (1.0 - eta * ctx.lambda_hat / 4.0).max(0.0);
    let ratio = if trace.initial_loss() > 0.0 { trace.final_loss() / trace.initial_loss() } else { 0.0 };
    report.insert(
        "convergence_rate",
        BoundEntry::new("convergence")
            .input("eta", eta)
            .input("lambda_hat", ctx.lambda_hat)
            .input("steps", t as f64)
            .upper(base.powf(t as f64), ratio)
            .note("loss(T)/loss(0) against (1 - eta lambda/4)^T"),
    );

    let dynamics = BoundEntry::new("error_dynamics").input("eta", eta);
    let dynamics = if cfg.model.init == InitKind::Symmetric && cfg.model.checkpoint.is_none() {
        let e = error_dynamics_residual(trace, ctx.hinf, eta, ctx.data.y())?;
        let y_norm = norm(ctx.data.y());
        let worst = e.iter().copied().fold(0.0, f64::max) / y_norm.max(f64::MIN_POSITIVE);
        dynamics.upper(cfg.bounds.constants.error_dynamics, worst).note("max_k ||e(k)|| / ||y||")
    } else {
        dynamics.note("requires a fresh symmetric initialization")
    };
    report.insert("error_dynamics", dynamics);

    report.insert(
        "activation_stability",
        BoundEntry::new("sparsity_stability")
            .input("steps", t as f64)
            .upper(cfg.bounds.constants.activation_drift, activation_drift(trace)),
    );
    Ok(())
}
