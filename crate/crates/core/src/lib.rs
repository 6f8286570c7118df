//! Single-level and multilevel Stein variational gradient descent over
//! hierarchies of Bayesian posterior densities.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernel`] | Gaussian RBF kernel, first-argument gradient, median heuristic |
//! | [`hierarchy`] | posterior hierarchies: linear-Gaussian and 1D elliptic PDE |
//! | [`svgd`] | particle ensemble, Stein gradient, update, single-level driver |
//! | [`mlsvgd`] | multilevel driver and level schedules |
//! | [`mcmc`] | preconditioned Crank–Nicolson reference sampler |
//! | [`diagnostics`] | MMD, relative error, Gaussian KL/Hellinger, rate fits |
//! | [`bounds`] | cost-complexity bounds and rate-function inverses |
//!
//! With the default `parallel` feature, per-particle and per-chain work runs
//! on rayon. All reductions happen in index order, so results are bit-identical
//! with and without the feature and for any thread count.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod diagnostics;
pub mod error;
pub mod hierarchy;
pub mod kernel;
pub mod mcmc;
pub mod mlsvgd;
pub mod par;
pub mod points;
pub mod rng;
pub mod svgd;

pub use error::{Error, Result};
pub use hierarchy::{BayesianHierarchy, CostModel, PosteriorHierarchy};
pub use kernel::KernelSpec;
pub use points::Points;
