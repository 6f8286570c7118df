//! Single-level SVGD.
//!
//! The Stein direction at `θ` for an ensemble `{θ_i}` and target `π^(ℓ)` is
//!
//! ```text
//! ĝ(θ) = −(1/N) Σ_i [ K(θ_i, θ) ∇log π^(ℓ)(θ_i) + ∇₁K(θ_i, θ) ]
//! ```
//!
//! and every particle moves synchronously by `θ_j ← θ_j − δ ĝ(θ_j)`.
//!
//! Sums over `i` run in a canonical order (particles sorted by coordinates),
//! which makes a step bit-for-bit equivariant under particle permutations and
//! independent of the thread count.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hierarchy::{standard_normal_vec, PosteriorHierarchy};
use crate::kernel::KernelSpec;
use crate::par;
use crate::points::{canonical_order, norm, Points};
use crate::rng::{stream, Purpose};

/// `N` particles in R^d plus the iteration counter and the running cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    particles: Points,
    iteration: usize,
    accumulated_cost: f64,
    level: usize,
}

impl ParticleEnsemble {
    pub fn new(particles: Points, level: usize) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Input("ensemble needs at least one particle".into()));
        }
        if !particles.all_finite() {
            return Err(Error::Input("ensemble has non-finite entries".into()));
        }
        Ok(Self {
            particles,
            iteration: 0,
            accumulated_cost: 0.0,
            level,
        })
    }

    /// `n` i.i.d. standard-normal particles from the `(seed, initial ensemble)` stream.
    pub fn standard_normal(n: usize, dim: usize, seed: u64, level: usize) -> Result<Self> {
        let mut rng = stream(seed, Purpose::InitialEnsemble, 0);
        let data = standard_normal_vec(&mut rng, n * dim);
        Self::new(Points::new(dim, data)?, level)
    }

    pub fn particles(&self) -> &Points {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.dim()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn accumulated_cost(&self) -> f64 {
        self.accumulated_cost
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn mean(&self) -> Vec<f64> {
        self.particles.mean()
    }

    /// Same particles and counters, retargeted to `level`.
    pub fn at_level(mut self, level: usize) -> Self {
        self.level = level;
        self
    }

    /// Particles permuted (see [`Points::permuted`]); counters unchanged.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            particles: self.particles.permuted(perm),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvgdConfig {
    pub step_size: f64,
    pub kernel: KernelSpec,
    pub tolerance: f64,
    pub max_iterations: usize,
}

pub const DEFAULT_STEP_SIZE: f64 = 0.05;
pub const DEFAULT_BANDWIDTH: f64 = 0.1;
pub const DEFAULT_TOLERANCE: f64 = 1e-2;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

impl SvgdConfig {
    pub fn new(step_size: f64, kernel: KernelSpec, tolerance: f64, max_iterations: usize) -> Result<Self> {
        let cfg = Self {
            step_size,
            kernel,
            tolerance,
            max_iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Step 0.05, bandwidth 0.1, tolerance 1e-2, 100000 iterations.
    pub fn with_defaults(dim: usize) -> Result<Self> {
        Self::new(
            DEFAULT_STEP_SIZE,
            KernelSpec::new(DEFAULT_BANDWIDTH, dim)?,
            DEFAULT_TOLERANCE,
            DEFAULT_MAX_ITERATIONS,
        )
    }

    pub fn validate(&self) -> Result<()> {
        // a zero step is allowed; it leaves the ensemble in place
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step size must be >= 0, got {}", self.step_size)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// One trace record: the state *before* the step taken at `iteration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub level: usize,
    pub mean_gradient_norm: f64,
    pub accumulated_cost: f64,
    pub wall_seconds: f64,
    /// Ensemble mean at this iteration.
    pub mean: Vec<f64>,
}

/// Iterations and cost spent on one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub tolerance: f64,
    pub iterations: usize,
    pub cost: f64,
    pub tolerance_met: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub levels: Vec<LevelSummary>,
}

impl RunTrace {
    pub fn tolerance_met(&self) -> bool {
        !self.levels.is_empty() && self.levels.iter().all(|l| l.tolerance_met)
    }

    pub fn total_iterations(&self) -> usize {
        self.levels.iter().map(|l| l.iterations).sum()
    }

    pub fn final_cost(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.accumulated_cost)
    }
}

/// `∇log π^(ℓ)` at every particle plus the canonical summation order.
struct GradientField {
    grads: Vec<Vec<f64>>,
    order: Vec<usize>,
}

fn gradient_field<H: PosteriorHierarchy + ?Sized>(
    ens: &ParticleEnsemble,
    hier: &H,
    level: usize,
) -> Result<GradientField> {
    hier.check_level(level)?;
    check_dim(hier.dimension(), ens.dim())?;
    let pts = &ens.particles;
    let grads = par::try_map_indexed(pts.len(), |i| hier.grad_log_density(level, pts.row(i)))?;
    let order = canonical_order(pts);
    Ok(GradientField { grads, order })
}

fn direction_at(pts: &Points, field: &GradientField, kernel: &KernelSpec, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    let mut acc = vec![0.0; d];
    let mut gk = vec![0.0; d];
    for &i in &field.order {
        let k = kernel.grad1_into(pts.row(i), x, &mut gk);
        for ((a, g), dk) in acc.iter_mut().zip(&field.grads[i]).zip(&gk) {
            *a += k * g + dk;
        }
    }
    let scale = -1.0 / pts.len() as f64;
    for (o, a) in out.iter_mut().zip(acc) {
        *o = scale * a;
    }
}

/// `ĝ(θ_j)` at every particle `j`.
fn stein_sweep<H: PosteriorHierarchy + ?Sized>(
    ens: &ParticleEnsemble,
    hier: &H,
    level: usize,
    kernel: &KernelSpec,
) -> Result<Vec<Vec<f64>>> {
    check_dim(kernel.dimension(), ens.dim())?;
    let field = gradient_field(ens, hier, level)?;
    let pts = &ens.particles;
    Ok(par::map_indexed(pts.len(), |j| {
        let mut out = vec![0.0; pts.dim()];
        direction_at(pts, &field, kernel, pts.row(j), &mut out);
        out
    }))
}

fn mean_norm(directions: &[Vec<f64>]) -> f64 {
    directions.iter().map(|g| norm(g)).sum::<f64>() / directions.len() as f64
}

/// Monte Carlo Stein direction `ĝ(eval_point)` from the current ensemble.
pub fn stein_gradient<H: PosteriorHierarchy + ?Sized>(
    ens: &ParticleEnsemble,
    hier: &H,
    level: usize,
    kernel: &KernelSpec,
    eval_point: &[f64],
) -> Result<Vec<f64>> {
    check_dim(ens.dim(), eval_point.len())?;
    check_dim(kernel.dimension(), eval_point.len())?;
    let field = gradient_field(ens, hier, level)?;
    let mut out = vec![0.0; eval_point.len()];
    direction_at(&ens.particles, &field, kernel, eval_point, &mut out);
    Ok(out)
}

/// `ḡ = (1/N) Σ_j ‖ĝ(θ_j)‖`.
pub fn mean_gradient_norm<H: PosteriorHierarchy + ?Sized>(
    ens: &ParticleEnsemble,
    hier: &H,
    level: usize,
    kernel: &KernelSpec,
) -> Result<f64> {
    Ok(mean_norm(&stein_sweep(ens, hier, level, kernel)?))
}

fn apply_step(ens: &ParticleEnsemble, directions: &[Vec<f64>], step: f64, cost: f64) -> Result<ParticleEnsemble> {
    let mut next = ens.particles.clone();
    for (j, g) in directions.iter().enumerate() {
        let row = next.row_mut(j);
        for (t, gi) in row.iter_mut().zip(g) {
            *t -= step * gi;
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: ens.iteration,
                particle: j,
            });
        }
    }
    Ok(ParticleEnsemble {
        particles: next,
        iteration: ens.iteration + 1,
        accumulated_cost: ens.accumulated_cost + ens.len() as f64 * cost,
        level: ens.level,
    })
}

/// One synchronous SVGD update at `level`.
pub fn svgd_step<H: PosteriorHierarchy + ?Sized>(
    ens: &ParticleEnsemble,
    hier: &H,
    level: usize,
    cfg: &SvgdConfig,
) -> Result<ParticleEnsemble> {
    if ens.level != level {
        return Err(Error::Input(format!(
            "ensemble targets level {}, step requested at level {level}",
            ens.level
        )));
    }
    let dirs = stein_sweep(ens, hier, level, &cfg.kernel)?;
    apply_step(ens, &dirs, cfg.step_size, hier.cost_weight(level))
}

/// Runs SVGD at one level, appending rows and a level summary to `trace`.
pub(crate) fn run_level<H: PosteriorHierarchy + ?Sized>(
    init: ParticleEnsemble,
    hier: &H,
    level: usize,
    cfg: &SvgdConfig,
    tolerance: f64,
    clock: Instant,
    trace: &mut RunTrace,
) -> Result<ParticleEnsemble> {
    cfg.validate()?;
    let mut ens = init.at_level(level);
    let cost_start = ens.accumulated_cost;
    let mut steps = 0;
    let met = loop {
        let dirs = stein_sweep(&ens, hier, level, &cfg.kernel)?;
        let gbar = mean_norm(&dirs);
        if !gbar.is_finite() {
            return Err(Error::Divergence {
                iteration: ens.iteration,
                particle: dirs.iter().position(|g| g.iter().any(|v| !v.is_finite())).unwrap_or(0),
            });
        }
        trace.rows.push(TraceRow {
            iteration: ens.iteration,
            level,
            mean_gradient_norm: gbar,
            accumulated_cost: ens.accumulated_cost,
            wall_seconds: clock.elapsed().as_secs_f64(),
            mean: ens.mean(),
        });
        if gbar <= tolerance {
            break true;
        }
        if steps >= cfg.max_iterations {
            break false;
        }
        ens = apply_step(&ens, &dirs, cfg.step_size, hier.cost_weight(level))?;
        steps += 1;
    };
    trace.levels.push(LevelSummary {
        level,
        tolerance,
        iterations: steps,
        cost: ens.accumulated_cost - cost_start,
        tolerance_met: met,
    });
    Ok(ens)
}

/// Iterates [`svgd_step`] at `level` until `ḡ ≤ cfg.tolerance` or
/// `cfg.max_iterations` steps. Hitting the iteration cap is reported through
/// [`RunTrace::tolerance_met`], not as an error.
pub fn run_svgd<H: PosteriorHierarchy + ?Sized>(
    init: ParticleEnsemble,
    hier: &H,
    level: usize,
    cfg: &SvgdConfig,
) -> Result<(ParticleEnsemble, RunTrace)> {
    let mut trace = RunTrace::default();
    let ens = run_level(init, hier, level, cfg, cfg.tolerance, Instant::now(), &mut trace)?;
    Ok((ens, trace))
}
