use serde_json::json;
use sntk_core::ntk::{empirical_ntk, write_kernel_csv, KernelExport};
use sntk_core::theory::{ntk_concentration_bound, BoundEntry, BoundsReport};
use sntk_core::{Dataset, KernelMethod, ModelState, SymMatrix};

use super::{limiting_kernel, load_dataset, load_model, EIG_TOL};
use crate::config::{ExperimentConfig, Format, NtkMethod};
use crate::error::CliError;
use crate::output::OutputDir;

/// Measured quantities comparing `H(0)` to `H_inf`.
pub struct KernelComparison {
    pub fro_diff: f64,
    pub lambda_empirical: f64,
    pub lambda_limit: f64,
    pub bound: f64,
}

impl KernelComparison {
    pub fn measure(cfg: &ExperimentConfig, h0: &SymMatrix, hinf: &SymMatrix, m: usize) -> Result<Self, CliError> {
        Ok(Self {
            fro_diff: h0.sub(hinf)?.frobenius_norm(),
            lambda_empirical: h0.smallest_eigenvalue(EIG_TOL)?,
            lambda_limit: hinf.smallest_eigenvalue(EIG_TOL)?,
            bound: ntk_concentration_bound(h0.dim(), m, cfg.model.bias, cfg.bounds.delta)?,
        })
    }

    /// `ntk_concentration` and `ntk_min_eig` entries.
    pub fn record(&self, cfg: &ExperimentConfig, n: usize, m: usize, report: &mut BoundsReport) {
        let inputs = |e: BoundEntry| {
            e.input("n", n as f64).input("m", m as f64).input("B", cfg.model.bias).input("delta", cfg.bounds.delta)
        };
        report.insert(
            "ntk_concentration",
            inputs(BoundEntry::new("fro_diff_discrete_limit_ntk")).upper(self.bound, self.fro_diff),
        );
        report.insert(
            "ntk_min_eig",
            inputs(BoundEntry::new("diff_discrete_limit_ntk"))
                .input("lambda_limit", self.lambda_limit)
                .lower(0.75 * self.lambda_limit, self.lambda_empirical),
        );
    }
}

fn kernels(cfg: &ExperimentConfig, model: &ModelState, data: &Dataset) -> Result<(SymMatrix, SymMatrix), CliError> {
    Ok((empirical_ntk(model, data)?, limiting_kernel(cfg, data)?))
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    let model = load_model(cfg, &data)?;
    let (h0, hinf) = kernels(cfg, &model, &data)?;
    let m = model.neurons();
    let cmp = KernelComparison::measure(cfg, &h0, &hinf, m)?;
    let mut report = BoundsReport::default();
    cmp.record(cfg, data.len(), m, &mut report);

    let method = match cfg.ntk.method {
        NtkMethod::Quadrature => KernelMethod::Quadrature,
        NtkMethod::MonteCarlo => KernelMethod::MonteCarlo,
    };
    if cfg.output.wants(Format::Csv) {
        write_kernel_csv(&hinf, out.create("kernel.csv")?)?;
        write_kernel_csv(&h0, out.create("kernel_empirical.csv")?)?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_json("kernel.json", &KernelExport::new(&hinf, cfg.model.bias, method))?;
        out.write_json("kernel_empirical.json", &KernelExport::new(&h0, cfg.model.bias, KernelMethod::Empirical))?;
        let summary = json!({
            "fro_diff": cmp.fro_diff,
            "lambda_min_empirical": cmp.lambda_empirical,
            "lambda_min_limit": cmp.lambda_limit,
            "concentration_bound": cmp.bound,
            "n": data.len(),
            "m": m,
            "B": cfg.model.bias,
        });
        out.write_json("summary.json", &summary)?;
        out.write_json("report.json", &report)?;
    }
    println!(
        "ntk: ||H(0) - H_inf||_F = {:.4e} (bound {:.4e}), lambda_min {:.4e} vs {:.4e}",
        cmp.fro_diff, cmp.bound, cmp.lambda_empirical, cmp.lambda_limit
    );
    match report.failures().as_slice() {
        [] => Ok(()),
        failed => Err(CliError::Verdict(format!("failed checks: {}", failed.join(", ")))),
    }
}
