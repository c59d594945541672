//! Dense numerical kernel shared by the rest of the crate.

mod matrix;
mod rng;
mod special;

pub use matrix::SymMatrix;
pub use rng::{gaussian_sample, RngStream, Sampler};
pub use special::{integrate, normal_cdf, normal_pdf, upper_tail, FRAC_1_SQRT_2PI};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
