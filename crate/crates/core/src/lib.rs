//! Numerical laboratory for one-hidden-layer ReLU networks trained from a
//! sparsity-inducing constant bias: gradient descent with an active-set
//! engine, empirical and limiting neural tangent kernels, and closed-form
//! bounds evaluated against measurements.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod model;
pub mod ntk;
pub mod numerics;
pub mod theory;
pub mod train;

pub use data::{Dataset, DatasetMeta};
pub use error::{Error, Result};
pub use model::{ActivationMask, Gradients, InitKind, InitScheme, ModelState, Movement};
pub use ntk::{FeatureMatrixZ, KernelMethod, PairProbMatrix};
pub use numerics::{RngStream, SymMatrix};
pub use theory::{BoundEntry, BoundsReport, RegionSpec, Verdict};
pub use train::{ActiveSetIndex, StepPath, TrackFlags, TrainConfig, TrainTrace};
