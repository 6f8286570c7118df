//! Hierarchies of posterior densities `π^(ℓ)`, `ℓ = 1..=L_max`, with per-level
//! cost weights.

mod elliptic;
mod gaussian;

pub use elliptic::{
    make_benchmark_elliptic, EllipticBenchmark, EllipticInverseProblem, Forcing, BENCHMARK_NUM_OBS,
    BENCHMARK_NUM_PARAMS, BENCHMARK_PRIOR_VAR,
};
pub use gaussian::{GaussianLinearBuilder, GaussianLinearHierarchy};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Per-level cost `c_ℓ = c₀ s^(γℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c0: f64,
    pub s: f64,
    pub gamma: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            c0: 1.0,
            s: 2.0,
            gamma: 1.0,
        }
    }
}

impl CostModel {
    pub fn new(c0: f64, s: f64, gamma: f64) -> Result<Self> {
        if !(c0 > 0.0 && s > 1.0 && gamma > 0.0) {
            return Err(Error::Config(format!(
                "cost model needs c0 > 0, s > 1, gamma > 0 (got {c0}, {s}, {gamma})"
            )));
        }
        Ok(Self { c0, s, gamma })
    }

    pub fn weight(&self, level: usize) -> f64 {
        self.c0 * self.s.powf(self.gamma * level as f64)
    }
}

/// An indexed family of unnormalized log-densities over R^d.
///
/// Implementations must be immutable and safe to evaluate concurrently.
pub trait PosteriorHierarchy: Sync {
    fn num_levels(&self) -> usize;
    fn dimension(&self) -> usize;
    /// Cost of one gradient evaluation at `level`; strictly increasing in `level`.
    fn cost_weight(&self, level: usize) -> f64;
    fn log_density(&self, level: usize, theta: &[f64]) -> Result<f64>;
    fn grad_log_density(&self, level: usize, theta: &[f64]) -> Result<Vec<f64>>;

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.num_levels() {
            return Err(Error::LevelOutOfRange {
                level,
                max: self.num_levels(),
            });
        }
        Ok(())
    }
}

/// A hierarchy of Bayesian posteriors `π^(ℓ)(θ) ∝ exp(-Φ_ℓ(θ)) π₀(θ)` with a
/// Gaussian prior `π₀ = N(m₀, Σ₀)` and forward maps `G^(ℓ)`.
pub trait BayesianHierarchy: PosteriorHierarchy {
    fn prior_mean(&self) -> &[f64];
    /// Lower Cholesky factor `L` with `Σ₀ = L Lᵀ`.
    fn prior_cholesky(&self) -> &DMatrix<f64>;
    /// Parameter-to-observable map `G^(ℓ)(θ)`.
    fn forward(&self, level: usize, theta: &[f64]) -> Result<Vec<f64>>;
    /// Negative log-likelihood `Φ_ℓ(θ) = ½‖y − G^(ℓ)(θ)‖²_{Γ⁻¹}`.
    fn misfit(&self, level: usize, theta: &[f64]) -> Result<f64>;

    /// Draws `m₀ + L z` with `z ~ N(0, I)`.
    fn sample_prior(&self, rng: &mut StreamRng) -> Vec<f64> {
        let z = standard_normal_vec(rng, self.dimension());
        let l = self.prior_cholesky();
        let mut out = self.prior_mean().to_vec();
        for i in 0..out.len() {
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                out[i] += l[(i, j)] * zj;
            }
        }
        out
    }
}

pub(crate) fn standard_normal_vec(rng: &mut StreamRng, d: usize) -> Vec<f64> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if !m.is_square() {
        return Err(Error::NotSpd(format!("{what} is not square")));
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::NotSpd(format!("{what} is not symmetric")));
    }
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd(format!("{what} is not positive definite")))
}
