//! Fixtures shared by the benchmarks.

use sntk_core::data::gen_linear_teacher;
use sntk_core::{Dataset, InitScheme, ModelState, RngStream};

/// Unit-norm linear-teacher inputs in dimension `d`.
pub fn dataset(d: usize, n: usize) -> Dataset {
    gen_linear_teacher(d, n, RngStream::new(2024, 100)).expect("valid generator parameters")
}

/// Standard init of width `m` for `data`.
pub fn model(m: usize, bias: f64, data: &Dataset) -> ModelState {
    ModelState::init(&InitScheme::standard(bias, 7), m, data.dim()).expect("valid init parameters")
}
