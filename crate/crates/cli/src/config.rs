//! TOML experiment configuration. A config fully determines a run.

use std::path::{Path, PathBuf};

use mlsvgd::bounds::{BipConstants, RateConstants, RateFunction};
use mlsvgd::hierarchy::{EllipticBenchmark, GaussianLinearBuilder};
use mlsvgd::mcmc::PcnConfig;
use mlsvgd::mlsvgd::ToleranceMap;
use mlsvgd::CostModel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    GaussianLinear(GaussianProblem),
    #[serde(rename = "elliptic-1d")]
    Elliptic1d(EllipticProblem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianProblem {
    pub dim: usize,
    pub obs_dim: usize,
    pub levels: usize,
    pub b0: f64,
    pub decay_base: f64,
    pub decay_rate: f64,
    pub prior_var: f64,
    pub noise_var: f64,
    pub prior_mean: f64,
}

impl Default for GaussianProblem {
    fn default() -> Self {
        Self {
            dim: 2,
            obs_dim: 4,
            levels: 3,
            b0: 1.0,
            decay_base: 2.0,
            decay_rate: 1.0,
            prior_var: 1.0,
            noise_var: 0.1,
            prior_mean: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipticProblem {
    pub levels: usize,
    pub coarse_cells: usize,
    pub noise_std: f64,
}

impl Default for EllipticProblem {
    fn default() -> Self {
        let b = EllipticBenchmark::new(0, 3);
        Self {
            levels: b.levels,
            coarse_cells: b.coarse_cells,
            noise_std: b.noise_std,
        }
    }
}

impl ProblemConfig {
    pub fn levels(&self) -> usize {
        match self {
            ProblemConfig::GaussianLinear(p) => p.levels,
            ProblemConfig::Elliptic1d(p) => p.levels,
        }
    }

    pub(crate) fn gaussian_builder(p: &GaussianProblem, seed: u64, cost: CostModel) -> GaussianLinearBuilder {
        let mut b = GaussianLinearBuilder::new(p.dim, p.obs_dim, p.levels, seed)
            .decay(p.b0, p.decay_base, p.decay_rate)
            .variances(p.prior_var, p.noise_var)
            .cost(cost);
        b.prior_mean = p.prior_mean;
        b
    }

    pub(crate) fn elliptic_benchmark(p: &EllipticProblem, seed: u64, cost: CostModel) -> EllipticBenchmark {
        EllipticBenchmark {
            seed,
            levels: p.levels,
            coarse_cells: p.coarse_cells,
            noise_std: p.noise_std,
            cost,
        }
    }
}

/// Kernel bandwidth: a number, or `"median"` for the median heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(f64),
    Rule(BandwidthRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthRule {
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlgorithmConfig {
    Svgd(SvgdParams),
    Mlsvgd(MlsvgdParams),
    Pcn(PcnParams),
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Svgd(_) => "svgd",
            AlgorithmConfig::Mlsvgd(_) => "mlsvgd",
            AlgorithmConfig::Pcn(_) => "pcn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvgdParams {
    pub particles: usize,
    pub step_size: f64,
    pub bandwidth: Bandwidth,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Target level; the finest level when absent.
    pub level: Option<usize>,
}

impl Default for SvgdParams {
    fn default() -> Self {
        Self {
            particles: 1000,
            step_size: mlsvgd::svgd::DEFAULT_STEP_SIZE,
            bandwidth: Bandwidth::Fixed(mlsvgd::svgd::DEFAULT_BANDWIDTH),
            tolerance: mlsvgd::svgd::DEFAULT_TOLERANCE,
            max_iterations: mlsvgd::svgd::DEFAULT_MAX_ITERATIONS,
            level: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlsvgdParams {
    pub particles: usize,
    pub step_size: f64,
    pub bandwidth: Bandwidth,
    /// Final gradient-norm tolerance.
    pub tolerance: f64,
    /// Iteration cap per level.
    pub max_iterations: usize,
    pub schedule: ScheduleConfig,
}

impl Default for MlsvgdParams {
    fn default() -> Self {
        let s = SvgdParams::default();
        Self {
            particles: s.particles,
            step_size: s.step_size,
            bandwidth: s.bandwidth,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            schedule: ScheduleConfig::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleConfig {
    /// Every level of the problem with the final tolerance.
    #[default]
    Uniform,
    /// Levels and tolerances from the rate constants `k1`, `alpha` and the
    /// cost base `s`, mapped to gradient-norm thresholds.
    Theoretical {
        k1: f64,
        alpha: f64,
        #[serde(default)]
        map: ToleranceMap,
    },
    Explicit {
        levels: Vec<usize>,
        tolerances: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcnParams {
    pub beta: f64,
    pub burn_in: usize,
    pub num_samples: usize,
    pub thinning: usize,
    pub chains: usize,
    pub level: Option<usize>,
}

impl Default for PcnParams {
    fn default() -> Self {
        let p = PcnConfig::mmd_reference(0);
        Self {
            beta: p.beta,
            burn_in: p.burn_in,
            num_samples: p.num_samples,
            thinning: p.thinning,
            chains: p.num_chains,
            level: None,
        }
    }
}

impl PcnParams {
    pub fn to_config(&self, seed: u64) -> PcnConfig {
        PcnConfig {
            beta: self.beta,
            burn_in: self.burn_in,
            num_samples: self.num_samples,
            thinning: self.thinning,
            num_chains: self.chains,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Cached reference written by `make-reference`, used for the relative
    /// error on problems without a closed-form posterior.
    pub reference_file: Option<PathBuf>,
    /// Exact posterior draws used as the MMD reference (Gaussian problems).
    pub mmd_reference_draws: Option<usize>,
    pub mmd_bandwidth: Bandwidth,
    pub write_particles: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            reference_file: None,
            mmd_reference_draws: None,
            mmd_bandwidth: Bandwidth::Rule(BandwidthRule::Median),
            write_particles: false,
        }
    }
}

/// pCN settings for `make-reference`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub beta: f64,
    pub burn_in: usize,
    pub num_samples: usize,
    pub thinning: usize,
    pub chains: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            beta: 0.01,
            burn_in: 10_000,
            num_samples: 1_000,
            thinning: 1,
            chains: 100,
        }
    }
}

impl ReferenceConfig {
    pub fn to_config(&self, seed: u64) -> PcnConfig {
        PcnConfig {
            beta: self.beta,
            burn_in: self.burn_in,
            num_samples: self.num_samples,
            thinning: self.thinning,
            num_chains: self.chains,
            seed,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn check_bandwidth(name: &str, b: Bandwidth) -> Result<()> {
    match b {
        Bandwidth::Fixed(h) => positive(name, h),
        Bandwidth::Rule(_) => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Field-level checks; problem-level checks happen when the problem is built.
    pub fn validate(&self) -> Result<()> {
        CostModel::new(self.cost.c0, self.cost.s, self.cost.gamma)
            .map_err(|e| CliError::Config(format!("cost: {e}")))?;
        if self.problem.levels() == 0 {
            return Err(CliError::Config("problem.levels must be >= 1".into()));
        }
        match &self.algorithm {
            AlgorithmConfig::Svgd(p) => {
                if p.particles == 0 {
                    return Err(CliError::Config("algorithm.particles must be >= 1".into()));
                }
                positive("algorithm.tolerance", p.tolerance)?;
                check_bandwidth("algorithm.bandwidth", p.bandwidth)?;
                if !(p.step_size >= 0.0) {
                    return Err(CliError::Config("algorithm.step_size must be >= 0".into()));
                }
            }
            AlgorithmConfig::Mlsvgd(p) => {
                if p.particles == 0 {
                    return Err(CliError::Config("algorithm.particles must be >= 1".into()));
                }
                positive("algorithm.tolerance", p.tolerance)?;
                check_bandwidth("algorithm.bandwidth", p.bandwidth)?;
                if !(p.step_size >= 0.0) {
                    return Err(CliError::Config("algorithm.step_size must be >= 0".into()));
                }
                if let ScheduleConfig::Theoretical { k1, alpha, .. } = p.schedule {
                    positive("algorithm.schedule.k1", k1)?;
                    positive("algorithm.schedule.alpha", alpha)?;
                }
            }
            AlgorithmConfig::Pcn(p) => {
                p.to_config(self.seed)
                    .validate()
                    .map_err(|e| CliError::Config(format!("algorithm: {e}")))?;
            }
        }
        check_bandwidth("diagnostics.mmd_bandwidth", self.diagnostics.mmd_bandwidth)?;
        self.reference
            .to_config(self.seed)
            .validate()
            .map_err(|e| CliError::Config(format!("reference: {e}")))?;
        Ok(())
    }
}

/// Settings of the `bounds-table` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsTableConfig {
    pub rates: RateConstants,
    pub bip: BipConstants,
    /// Defaults to `exp(-λ t)` with `λ` from `rates`.
    pub rate_function: Option<RateFunction>,
    pub eps: Vec<f64>,
}

impl Default for BoundsTableConfig {
    fn default() -> Self {
        Self {
            rates: RateConstants {
                c0: 1.0,
                s: 2.0,
                gamma: 1.0,
                alpha: 1.0,
                k1: 0.5,
                k2: 1.0,
                k3: 0.0,
                lambda: 1.0,
                kl0: 2.0,
            },
            bip: BipConstants {
                b0: 1.0,
                b1: 1.0,
                b2: 1.0,
                b3: 1.0,
            },
            rate_function: None,
            eps: vec![1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3],
        }
    }
}

impl BoundsTableConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
