//! Closed-form bounds as explicit functions of measurable inputs, the
//! data-dependent coefficient region, and a sampled estimate of the
//! region-restricted least eigenvalue.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::data::{pair_separation, Dataset};
use crate::error::{Error, Result};
use crate::ntk::PairProbMatrix;
use crate::numerics::{norm, normal_pdf, upper_tail, RngStream, SymMatrix};
use crate::train::TrainTrace;

/// Flipping-probability constant `2 e^{1/2} / sqrt(2 pi)`, rounded up.
pub const FLIP_CONSTANT: f64 = 1.32;

/// Calibrated constant for [`initial_error_bound`] in empirical checks.
pub const INITIAL_ERROR_CONSTANT: f64 = 8.0;

fn nonnegative(v: f64, name: &str) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidInput(format!("{name} must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

fn probability(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("failure probability must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Exact chance that a neuron with bias `B` flips on a unit input when its
/// weight moves by at most `Rw` and its bias by at most `Rb`:
/// `Pr[|g - B| < Rw + Rb]`.
pub fn flipping_prob_exact(rw: f64, rb: f64, bias: f64) -> Result<f64> {
    nonnegative(rw, "Rw")?;
    nonnegative(rb, "Rb")?;
    let r = rw + rb;
    Ok((upper_tail(bias - r) - upper_tail(bias + r)).max(0.0))
}

/// `c (Rw + Rb) e^{-B^2/2}`, valid while `Rw + Rb <= min(1/B, 1)`.
pub fn flipping_prob_bound(rw: f64, rb: f64, bias: f64, c: f64) -> Result<f64> {
    nonnegative(rw, "Rw")?;
    nonnegative(rb, "Rb")?;
    nonnegative(bias, "B")?;
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("constant must be positive, got {c}")));
    }
    let r = rw + rb;
    let limit = if bias > 0.0 { (1.0 / bias).min(1.0) } else { 1.0 };
    if r > limit {
        return Err(Error::Domain(format!("Rw + Rb = {r} exceeds min(1/B, 1) = {limit}")));
    }
    Ok(c * r * (-0.5 * bias * bias).exp())
}

/// `8 sqrt(n) ||y - f(0)|| / (sqrt(m) lam)`, the radius for both weights
/// and biases.
pub fn movement_bound(n: usize, initial_residual_norm: f64, m: usize, lam: f64) -> Result<f64> {
    if !(lam > 0.0) {
        return Err(Error::Domain(format!("eigenvalue must be positive, got {lam}")));
    }
    if m == 0 {
        return Err(Error::InvalidInput("width must be positive".into()));
    }
    nonnegative(initial_residual_norm, "residual norm")?;
    Ok(8.0 * (n as f64).sqrt() * initial_residual_norm / ((m as f64).sqrt() * lam))
}

/// `C (n + n (e^{-B^2/2} + 1/m) log^3(2mn/delta))`.
pub fn initial_error_bound(n: usize, m: usize, bias: f64, delta: f64, constant: f64) -> Result<f64> {
    probability(delta)?;
    if m == 0 {
        return Err(Error::InvalidInput("width must be positive".into()));
    }
    let (n, m) = (n as f64, m as f64);
    let log = (2.0 * m * n / delta).ln();
    Ok(constant * (n + n * ((-0.5 * bias * bias).exp() + 1.0 / m) * log.powi(3)))
}

/// `4 n e^{-B^2/4} sqrt(log(n^2/delta) / m)`.
pub fn ntk_concentration_bound(n: usize, m: usize, bias: f64, delta: f64) -> Result<f64> {
    probability(delta)?;
    if m == 0 {
        return Err(Error::InvalidInput("width must be positive".into()));
    }
    let nf = n as f64;
    Ok(4.0 * nf * (-0.25 * bias * bias).exp() * ((nf * nf / delta).ln() / m as f64).sqrt())
}

/// `2 m e^{-B^2/2}`.
pub fn activated_count_bound(m: usize, bias: f64) -> f64 {
    2.0 * m as f64 * (-0.5 * bias * bias).exp()
}

/// `min_{i<j} min(||x_i - x_j||, ||x_i + x_j||)`.
pub fn data_separation(data: &Dataset) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Domain(format!("separation needs at least two points, got {n}")));
    }
    let mut sep = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            sep = sep.min(pair_separation(data.column(i), data.column(j)));
        }
    }
    Ok(sep)
}

/// `max(0, lambda')` with
/// `lambda' = p0_lower(B) - e^{-B^2/(2 - delta^2/2)} (pi - atan(delta sqrt(1 - delta^2/4) / (1 - delta^2/2))) / (2 pi)`.
///
/// `p0_lower(B) = max(1/2 - B/sqrt(2 pi), (1/B - 1/B^3) phi(B))`, the second
/// branch only for `B > 1`. The arctangent is taken as `atan2` so that
/// `delta = sqrt(2)` gives its `pi/2` limit; past that point the argument's
/// denominator would turn negative, which the clamp to zero excludes.
pub fn restricted_eig_lower_bound(bias: f64, delta_sep: f64) -> Result<f64> {
    nonnegative(bias, "B")?;
    if !(0.0..=SQRT_2).contains(&delta_sep) {
        return Err(Error::Domain(format!("separation must lie in [0, sqrt(2)], got {delta_sep}")));
    }
    let mut p0 = 0.5 - bias / (2.0 * PI).sqrt();
    if bias > 1.0 {
        p0 = p0.max((1.0 / bias - bias.powi(-3)) * normal_pdf(bias));
    }
    let d2 = delta_sep * delta_sep;
    let angle = (delta_sep * (1.0 - 0.25 * d2).max(0.0).sqrt()).atan2((1.0 - 0.5 * d2).max(0.0));
    let pair = (-bias * bias / (2.0 - 0.5 * d2)).exp() * (PI - angle) / (2.0 * PI);
    Ok((p0 - pair).max(0.0))
}

/// The region `R = {a : sum_{i != j} a_i a_j p_ij >= p_min sum_{i != j} a_i a_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    probs: PairProbMatrix,
    p_min: Option<f64>,
}

impl RegionSpec {
    pub fn new(probs: PairProbMatrix) -> Result<Self> {
        let p_min = probs.min_off_diagonal();
        if let Some(p) = p_min {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidInput(format!("minimum off-diagonal probability {p} is invalid")));
            }
        }
        Ok(Self { probs, p_min })
    }

    pub fn dim(&self) -> usize {
        self.probs.dim()
    }

    pub fn probs(&self) -> &PairProbMatrix {
        &self.probs
    }

    /// `min_{i != j} p_ij`, absent for a single point.
    pub fn p_min(&self) -> Option<f64> {
        self.p_min
    }
}

/// Membership in `R`, evaluated as `sum_{i != j} a_i a_j (p_ij - p_min) >= 0`.
/// The rearrangement is exact for nonnegative `a` and for constant
/// off-diagonals, where every term is nonnegative or zero.
pub fn region_membership(a: &[f64], region: &RegionSpec) -> Result<bool> {
    let n = region.dim();
    if a.len() != n {
        return Err(Error::DimensionMismatch { what: "coefficient vector", expected: n, found: a.len() });
    }
    let Some(p_min) = region.p_min else {
        return Ok(true);
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += a[i] * a[j] * (region.probs.get(i, j) - p_min);
            }
        }
    }
    Ok(total >= 0.0)
}

/// Smallest `a^T H a` over `samples` random unit vectors in `R`. Even draws
/// are normalized absolute Gaussians (always in `R`); odd draws keep their
/// signs and are discarded when they fall outside `R`. The result is an
/// upper estimate of the true restricted minimum.
pub fn restricted_min_eig_estimate(h: &SymMatrix, region: &RegionSpec, samples: usize, stream: RngStream) -> Result<f64> {
    let n = region.dim();
    if h.dim() != n {
        return Err(Error::DimensionMismatch { what: "kernel", expected: n, found: h.dim() });
    }
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let mut sampler = stream.sampler();
    let mut a = vec![0.0; n];
    let mut best: Option<f64> = None;
    for s in 0..samples {
        sampler.fill_gaussian(&mut a);
        if s % 2 == 0 {
            a.iter_mut().for_each(|v| *v = v.abs());
        }
        let len = norm(&a);
        if len == 0.0 {
            continue;
        }
        a.iter_mut().for_each(|v| *v /= len);
        if s % 2 == 1 && !region_membership(&a, region)? {
            continue;
        }
        let q = h.quadratic_form(&a);
        best = Some(best.map_or(q, |b: f64| b.min(q)));
    }
    best.ok_or_else(|| Error::Internal("no sampled vector fell inside the region".into()))
}

fn kernel_quadratic(hinf: &SymMatrix, y: &[f64], n: usize) -> Result<f64> {
    if y.len() != hinf.dim() {
        return Err(Error::DimensionMismatch { what: "response vector", expected: hinf.dim(), found: y.len() });
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    hinf.quadratic_form_inverse(y, 0.0)
}

/// `sqrt(y^T H_inf^{-1} y * 32 e^{-B^2/2} / n)`.
pub fn generalization_bound(hinf: &SymMatrix, y: &[f64], bias: f64, n: usize) -> Result<f64> {
    let q = kernel_quadratic(hinf, y, n)?;
    Ok((q * 32.0 * (-0.5 * bias * bias).exp() / n as f64).sqrt())
}

/// Placeholder for the `O~(n^{-1/2})` remainder with unit constant.
pub fn generalization_remainder(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

/// `sqrt(y^T H_inf^{-1} y * 8 e^{-B^2/2} / n)`.
pub fn rademacher_leading_term(hinf: &SymMatrix, y: &[f64], bias: f64, n: usize) -> Result<f64> {
    let q = kernel_quadratic(hinf, y, n)?;
    Ok((q * 8.0 * (-0.5 * bias * bias).exp() / n as f64).sqrt())
}

/// `||e(k)||` for `e(k) = (f(k) - y) + (I - eta H_inf)^k y`, one entry per
/// recorded step.
pub fn error_dynamics_residual(trace: &TrainTrace, hinf: &SymMatrix, eta: f64, y: &[f64]) -> Result<Vec<f64>> {
    if trace.residuals.is_empty() {
        return Err(Error::MissingData("the trace holds no residuals"));
    }
    let n = hinf.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch { what: "response vector", expected: n, found: y.len() });
    }
    let mut v = y.to_vec();
    let mut out = Vec::with_capacity(trace.residuals.len());
    for residual in &trace.residuals {
        if residual.len() != n {
            return Err(Error::DimensionMismatch { what: "trace residual", expected: n, found: residual.len() });
        }
        let e: Vec<f64> = residual.iter().zip(&v).map(|(r, p)| r + p).collect();
        out.push(norm(&e));
        let hv = hinf.mul_vec(&v);
        v.iter_mut().zip(hv).for_each(|(p, q)| *p -= eta * q);
    }
    Ok(out)
}

/// `lambda_min(H_inf(B)) e^{B^2/2}` per bias, which is constant when the
/// limiting eigenvalue scales as `lambda_0 e^{-B^2/2}`.
pub fn lambda0_profile(data: &Dataset, biases: &[f64], tol: f64) -> Result<Vec<f64>> {
    biases
        .iter()
        .map(|&b| {
            let h = crate::ntk::limiting_ntk_quadrature(data, b)?;
            Ok(h.smallest_eigenvalue(tol)? * (0.5 * b * b).exp())
        })
        .collect()
}

/// Relative spread `(max - min) / max` of a positive profile.
pub fn relative_spread(values: &[f64]) -> Option<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (max > 0.0 && values.iter().all(|v| v.is_finite())).then(|| (max - min) / max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    /// The lemma or theorem the entry instantiates.
    pub instantiates: String,
    pub inputs: BTreeMap<String, f64>,
    pub bound: Option<f64>,
    pub measured: Option<f64>,
    pub verdict: Verdict,
    /// Why an entry is not applicable or failed without a measurement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundEntry {
    pub fn new(instantiates: &str) -> Self {
        Self {
            instantiates: instantiates.to_owned(),
            inputs: BTreeMap::new(),
            bound: None,
            measured: None,
            verdict: Verdict::NotApplicable,
            note: None,
        }
    }

    pub fn input(mut self, key: &str, value: f64) -> Self {
        self.inputs.insert(key.to_owned(), value);
        self
    }

    /// Passes when `measured <= bound`.
    pub fn upper(mut self, bound: f64, measured: f64) -> Self {
        self.bound = Some(bound);
        self.measured = Some(measured);
        self.verdict = if measured <= bound { Verdict::Pass } else { Verdict::Fail };
        self
    }

    /// Passes when `measured >= bound`.
    pub fn lower(mut self, bound: f64, measured: f64) -> Self {
        self.bound = Some(bound);
        self.measured = Some(measured);
        self.verdict = if measured >= bound { Verdict::Pass } else { Verdict::Fail };
        self
    }

    /// Records a value with no check attached.
    pub fn value(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self.verdict = Verdict::NotApplicable;
        self
    }

    pub fn fail(mut self) -> Self {
        self.verdict = Verdict::Fail;
        self
    }

    pub fn measured(mut self, measured: f64) -> Self {
        self.measured = Some(measured);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Bound key to entry, serialized as one JSON object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundsReport {
    pub entries: BTreeMap<String, BoundEntry>,
}

impl BoundsReport {
    pub fn insert(&mut self, key: &str, entry: BoundEntry) {
        self.entries.insert(key.to_owned(), entry);
    }

    pub fn get(&self, key: &str) -> Option<&BoundEntry> {
        self.entries.get(key)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.values().all(|e| e.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.entries.iter().filter(|(_, e)| e.verdict == Verdict::Fail).map(|(k, _)| k.as_str()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(format!("report serialization: {e}")))
    }
}

/// Largest per-step loss ratio divided by the predicted contraction
/// `1 - eta lam_t / 4`; at most one when every step contracts as predicted.
pub fn worst_contraction_ratio(trace: &TrainTrace, lam_per_step: &[f64]) -> Result<f64> {
    let losses = &trace.loss_history;
    if lam_per_step.len() + 1 < losses.len() {
        return Err(Error::DimensionMismatch {
            what: "eigenvalue per step",
            expected: losses.len().saturating_sub(1),
            found: lam_per_step.len(),
        });
    }
    let mut worst: f64 = 0.0;
    for t in 0..losses.len().saturating_sub(1) {
        let predicted = 1.0 - trace.eta * lam_per_step[t] / 4.0;
        worst = worst.max(losses[t + 1] / losses[t] / predicted);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_orthonormal, DatasetMeta};
    use crate::ntk::{limiting_ntk_quadrature, pair_prob_matrix};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn flipping_trivial_values() {
        assert_eq!(flipping_prob_exact(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(flipping_prob_bound(0.0, 0.0, 2.0, FLIP_CONSTANT).unwrap(), 0.0);
        assert!(close(flipping_prob_bound(0.05, 0.05, 0.0, 1.32).unwrap(), 0.132, 1e-15));
        assert!(matches!(flipping_prob_bound(0.3, 0.3, 2.0, 1.32), Err(Error::Domain(_))));
        assert!(matches!(flipping_prob_bound(0.6, 0.6, 0.0, 1.32), Err(Error::Domain(_))));
        assert!(flipping_prob_exact(-0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn flipping_first_order_at_zero_bias() {
        let r = 1e-4;
        let exact = flipping_prob_exact(r, 0.0, 0.0).unwrap();
        let series = 2.0 * r / (2.0 * PI).sqrt();
        assert!(((exact - series) / series).abs() <= 1e-4);
    }

    #[test]
    fn movement_values() {
        assert!(close(movement_bound(4, 2.0, 1024, 0.25).unwrap(), 4.0, 1e-15));
        assert_eq!(movement_bound(4, 0.0, 1024, 0.25).unwrap(), 0.0);
        assert!(matches!(movement_bound(4, 1.0, 16, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn initial_error_scaling() {
        let a = initial_error_bound(10, 512, 1.0, 0.05, 1.0).unwrap();
        let b = initial_error_bound(20, 512, 1.0, 0.05, 1.0).unwrap();
        assert!(b > a);
        let lo = initial_error_bound(10, 512, 2.0, 0.05, 1.0).unwrap();
        assert!(lo <= a);
        assert!(initial_error_bound(10, 512, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn concentration_value_and_width_scaling() {
        let v = ntk_concentration_bound(16, 16384, 0.5, 0.05).unwrap();
        let want = 64.0 * (-1.0f64 / 16.0).exp() * ((256.0f64 / 0.05).ln() / 16384.0).sqrt();
        assert!(close(v, want, 1e-15));
        let half = ntk_concentration_bound(16, 32768, 0.5, 0.05).unwrap();
        assert!(close(v / half, SQRT_2, 1e-12));
    }

    #[test]
    fn activated_count_values() {
        assert_eq!(activated_count_bound(100, 0.0), 200.0);
        assert!(close(activated_count_bound(8192, 2.0), 2217.33, 0.01));
        assert!(activated_count_bound(100, 1.0) > activated_count_bound(100, 1.1));
    }

    #[test]
    fn separation_cases() {
        let ortho = Dataset::new(2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2], DatasetMeta::default()).unwrap();
        assert!(close(data_separation(&ortho).unwrap(), SQRT_2, 1e-15));
        let anti = Dataset::new(2, vec![1.0, 0.0, -1.0, 0.0], vec![0.0; 2], DatasetMeta::default()).unwrap();
        assert_eq!(data_separation(&anti).unwrap(), 0.0);
        let single = Dataset::new(2, vec![1.0, 0.0], vec![0.0], DatasetMeta::default()).unwrap();
        assert!(matches!(data_separation(&single), Err(Error::Domain(_))));
    }

    #[test]
    fn restricted_bound_reference_points() {
        assert!(close(restricted_eig_lower_bound(0.0, SQRT_2).unwrap(), 0.25, 1e-15));
        assert!(close(restricted_eig_lower_bound(0.0, 1.0).unwrap(), 1.0 / 6.0, 1e-15));
        assert_eq!(restricted_eig_lower_bound(0.0, 0.0).unwrap(), 0.0);
        assert!(restricted_eig_lower_bound(0.0, 1.5).is_err());
        assert!(restricted_eig_lower_bound(3.0, 1.0).unwrap() >= 0.0);
    }

    #[test]
    fn region_basics() {
        let p = SymMatrix::from_row_major(3, vec![0.5, 0.2, 0.3, 0.2, 0.5, 0.4, 0.3, 0.4, 0.5]).unwrap();
        let region = RegionSpec::new(PairProbMatrix::from_matrix(0.0, p).unwrap()).unwrap();
        assert!(region_membership(&[0.0; 3], &region).unwrap());
        assert!(region_membership(&[1.0, 2.0, 0.5], &region).unwrap());
        // a_2 a_3 (p_23 - p_min) is the only negative contribution here.
        assert!(!region_membership(&[0.0, 1.0, -1.0], &region).unwrap());
        assert!(region_membership(&[1.0], &region).is_err());

        let flat = SymMatrix::from_fn(3, |i, j| if i == j { 0.5 } else { 0.25 });
        let region = RegionSpec::new(PairProbMatrix::from_matrix(0.0, flat).unwrap()).unwrap();
        assert!(region_membership(&[1.0, -3.0, 0.2], &region).unwrap());
    }

    #[test]
    fn restricted_estimate_on_identity_and_orthonormal_data() {
        let data = gen_orthonormal(16, 8, RngStream::new(3, 0)).unwrap();
        let region = RegionSpec::new(pair_prob_matrix(&data, 0.0).unwrap()).unwrap();
        let est = restricted_min_eig_estimate(&SymMatrix::identity(8), &region, 64, RngStream::new(3, 1)).unwrap();
        assert!(close(est, 1.0, 1e-12));
        let h = limiting_ntk_quadrature(&data, 0.0).unwrap();
        let est = restricted_min_eig_estimate(&h, &region, 2000, RngStream::new(3, 2)).unwrap();
        assert!((0.25 - 1e-9..=1.25).contains(&est), "{est}");
        assert!(est >= h.smallest_eigenvalue(1e-12).unwrap() - 1e-12);
    }

    #[test]
    fn generalization_reference_values() {
        let h = SymMatrix::identity(100);
        let y = vec![1.0; 100];
        let g = generalization_bound(&h, &y, 0.0, 100).unwrap();
        assert!(close(g, 32f64.sqrt(), 1e-12));
        let r = rademacher_leading_term(&h, &y, 0.0, 100).unwrap();
        assert!(close(r, g / 2.0, 1e-12));
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        assert!(close(generalization_bound(&h, &y2, 0.0, 100).unwrap(), 2.0 * g, 1e-12));
        let b = (2.0 * 2f64.ln()).sqrt();
        assert!(close(generalization_bound(&h, &y, b, 100).unwrap(), g / SQRT_2, 1e-12));
        assert!(matches!(generalization_bound(&SymMatrix::zeros(2), &[1.0, 1.0], 0.0, 2), Err(Error::Singular { .. })));
    }

    #[test]
    fn report_json_shape() {
        let mut report = BoundsReport::default();
        report.insert("movement_dw", BoundEntry::new("weight_bias_movement").input("n", 4.0).upper(1.0, 0.5));
        report.insert("generalization", BoundEntry::new("generalization"));
        report.insert("flipping_prob", BoundEntry::new("bound_flipping").upper(0.1, 0.2));
        assert!(!report.all_pass());
        assert_eq!(report.failures(), vec!["flipping_prob"]);
        let v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(v["movement_dw"]["verdict"], "pass");
        assert_eq!(v["movement_dw"]["measured"], 0.5);
        assert_eq!(v["generalization"]["verdict"], "n/a");
        assert!(v["generalization"]["measured"].is_null());
    }
}
