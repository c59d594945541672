//! Standard normal distribution functions and Gauss-Legendre quadrature.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

/// `1 / sqrt(2 pi)`.
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Upper tail `Q(x) = Pr[g >= x]` for `g ~ N(0, 1)`, via `libm::erfc`
/// (the fdlibm rational approximations, accurate to about one ulp).
pub fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `Phi(x) = Pr[g <= x]`.
pub fn normal_cdf(x: f64) -> f64 {
    upper_tail(-x)
}

const RULE_POINTS: usize = 16;

/// Nodes and weights of the 16-point Gauss-Legendre rule on `[-1, 1]`,
/// computed once by Newton iteration on `P_16`.
fn legendre_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(RULE_POINTS))
}

pub(crate) fn gauss_legendre(points: usize) -> Vec<(f64, f64)> {
    let n = points;
    let mut rule = Vec::with_capacity(n);
    for k in 0..n {
        // Chebyshev-like initial guess for the k-th root.
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            derivative = dp;
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        derivative = if dp != 0.0 { dp } else { derivative };
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite 16-point Gauss-Legendre over `panels` equal panels of
/// `[lo, hi]`. Returns `0` for an empty interval and flips sign when
/// `hi < lo`.
pub fn integrate(lo: f64, hi: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let rule = legendre_rule();
    let width = (hi - lo) / panels as f64;
    let half = 0.5 * width;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        let mut panel = 0.0;
        for &(x, w) in rule {
            panel += w * f(mid + half * x);
        }
        total += half * panel;
    }
    total
}
