//! 1D elliptic inverse problem
//!
//! ```text
//! -(exp(β̄(x)) u'(x))' = f(x),  x in (0, 1),  u(0) = u(1) = 0
//! ```
//!
//! where `β̄` is the piecewise-linear interpolant of the parameter vector on
//! `d` equispaced nodes. Level `ℓ` discretizes with `n_ℓ = n₀ 2^(ℓ−1)` cells
//! using second-order finite differences (coefficient at cell midpoints);
//! observations are linear interpolants of the nodal solution. Gradients use
//! the discrete adjoint of the tridiagonal system.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{standard_normal_vec, BayesianHierarchy, CostModel, PosteriorHierarchy};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::rng::{stream, Purpose};

pub const BENCHMARK_NUM_PARAMS: usize = 25;
pub const BENCHMARK_NUM_OBS: usize = 10;
pub const BENCHMARK_PRIOR_VAR: f64 = 0.05;
const BENCHMARK_COARSE_CELLS: usize = 32;
const BENCHMARK_NOISE_STD: f64 = 0.01;
const BENCHMARK_FORCING: f64 = 8.0;
const BENCHMARK_ZETA: f64 = 0.1;
const BENCHMARK_PERTURBATION: f64 = 0.15;

/// Right-hand side `f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forcing {
    Constant {
        value: f64,
    },
    /// Values on an equispaced grid over [0, 1], linearly interpolated.
    Tabulated {
        values: Vec<f64>,
    },
}

impl Forcing {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Forcing::Constant { value } => *value,
            Forcing::Tabulated { values } => {
                let (j, w) = locate(x, values.len() - 1);
                (1.0 - w) * values[j] + w * values[j + 1]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Forcing::Constant { value } if value.is_finite() => Ok(()),
            Forcing::Tabulated { values } if values.len() >= 2 && values.iter().all(|v| v.is_finite()) => Ok(()),
            _ => Err(Error::Config(
                "forcing must be finite with >= 2 tabulated values".into(),
            )),
        }
    }
}

/// Segment index and local weight of `x ∈ [0, 1]` on a grid of `segments` cells.
fn locate(x: f64, segments: usize) -> (usize, f64) {
    let p = (x * segments as f64).clamp(0.0, segments as f64);
    let j = (p.floor() as usize).min(segments - 1);
    (j, p - j as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticInverseProblem {
    pub num_params: usize,
    pub num_levels: usize,
    /// Cells on level 1; level `ℓ` uses `coarse_cells · 2^(ℓ−1)`.
    pub coarse_cells: usize,
    pub forcing: Forcing,
    pub observation_points: Vec<f64>,
    pub noise_std: Vec<f64>,
    pub data: Vec<f64>,
    pub prior_mean: Vec<f64>,
    pub prior_var: f64,
    #[serde(default)]
    pub cost: CostModel,
    /// Data-generating parameters, when known.
    #[serde(default)]
    pub truth: Option<Vec<f64>>,
    #[serde(skip)]
    prior_chol: Option<DMatrix<f64>>,
}

/// Solution of one forward solve: nodal values (including both boundary
/// zeros) and cell coefficients.
struct ForwardState {
    u: Vec<f64>,
    k: Vec<f64>,
    partials: Vec<CellPartials>,
    cells: usize,
}

/// Up to two pieces per cell, two hat functions per piece.
type CellPartials = [(usize, f64); 4];

impl EllipticInverseProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_params: usize,
        num_levels: usize,
        coarse_cells: usize,
        forcing: Forcing,
        observation_points: Vec<f64>,
        noise_std: Vec<f64>,
        data: Vec<f64>,
        prior_mean: Vec<f64>,
        prior_var: f64,
        cost: CostModel,
    ) -> Result<Self> {
        let p = Self {
            num_params,
            num_levels,
            coarse_cells,
            forcing,
            observation_points,
            noise_std,
            data,
            prior_mean,
            prior_var,
            cost,
            truth: None,
            prior_chol: None,
        };
        p.validated()
    }

    /// Checks invariants and caches the prior factor. Call after deserializing.
    pub fn validated(mut self) -> Result<Self> {
        if self.num_params < 2 {
            return Err(Error::Config("elliptic problem needs >= 2 parameters".into()));
        }
        if self.num_levels == 0 {
            return Err(Error::Config("elliptic problem needs >= 1 level".into()));
        }
        if self.coarse_cells < 4 || self.coarse_cells < self.num_params - 1 {
            return Err(Error::Config(
                "coarsest mesh needs >= 4 cells and no fewer cells than parameter intervals".into(),
            ));
        }
        self.forcing.validate()?;
        let q = self.observation_points.len();
        if q == 0 {
            return Err(Error::Config("no observation points".into()));
        }
        if self.observation_points.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Config(
                "observation points must lie strictly inside (0, 1)".into(),
            ));
        }
        check_dim(q, self.noise_std.len())?;
        check_dim(q, self.data.len())?;
        check_dim(self.num_params, self.prior_mean.len())?;
        if self.noise_std.iter().any(|&s| !(s > 0.0)) || !(self.prior_var > 0.0) {
            return Err(Error::Config("noise std and prior variance must be positive".into()));
        }
        if let Some(t) = &self.truth {
            check_dim(self.num_params, t.len())?;
        }
        CostModel::new(self.cost.c0, self.cost.s, self.cost.gamma)?;
        self.prior_chol = Some(DMatrix::identity(self.num_params, self.num_params) * self.prior_var.sqrt());
        Ok(self)
    }

    pub fn cells(&self, level: usize) -> usize {
        self.coarse_cells << (level - 1)
    }

    /// Cell coefficients `k_c = h / ∫_cell exp(−β̄)` (harmonic average over the
    /// cell) and, per cell, the nonzero partials `∂k_c/∂θ_j`.
    ///
    /// The integral is split at interpolation nodes and each piece uses
    /// 3-point Gauss–Legendre, so the partials are exact derivatives of the
    /// discrete map.
    fn cell_coefficients(&self, cells: usize, theta: &[f64]) -> (Vec<f64>, Vec<CellPartials>) {
        const GL_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const GL_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let h = 1.0 / cells as f64;
        let segs = self.num_params - 1;
        let mut ks = Vec::with_capacity(cells);
        let mut partials = Vec::with_capacity(cells);
        for c in 0..cells {
            let (a, b) = (c as f64 * h, (c + 1) as f64 * h);
            let mut cuts = vec![a];
            let first = (a * segs as f64).floor() as usize + 1;
            let mut node = first;
            while (node as f64) / (segs as f64) < b {
                let x = node as f64 / segs as f64;
                if x > a {
                    cuts.push(x);
                }
                node += 1;
            }
            cuts.push(b);

            let mut integral = 0.0;
            let mut dint: CellPartials = [(0, 0.0); 4];
            let mut used = 0;
            for piece in cuts.windows(2) {
                let (lo, hi) = (piece[0], piece[1]);
                let (j, _) = locate(0.5 * (lo + hi), segs);
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                let (mut s0, mut s1) = (0.0, 0.0);
                for (gx, gw) in GL_X.iter().zip(GL_W) {
                    let x = mid + half * gx;
                    let w = x * segs as f64 - j as f64;
                    let e = (-((1.0 - w) * theta[j] + w * theta[j + 1])).exp() * gw * half;
                    integral += e;
                    s0 += e * (1.0 - w);
                    s1 += e * w;
                }
                // d/dθ ∫exp(−β̄) = −∫exp(−β̄) φ_j
                dint[used] = (j, -s0);
                dint[used + 1] = (j + 1, -s1);
                used += 2;
            }
            let k = h / integral;
            // ∂k/∂θ = −h/I² ∂I/∂θ = −k²/h ∂I/∂θ
            for e in dint.iter_mut() {
                e.1 *= -k * k / h;
            }
            ks.push(k);
            partials.push(dint);
        }
        (ks, partials)
    }

    fn solve(&self, cells: usize, theta: &[f64], level: usize) -> Result<ForwardState> {
        check_dim(self.num_params, theta.len())?;
        check_finite(theta)?;
        let n = cells;
        let h = 1.0 / n as f64;
        let (k, partials) = self.cell_coefficients(n, theta);
        if k.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Solver {
                level,
                reason: "coefficient overflow".into(),
                theta: theta.to_vec(),
            });
        }
        let inv_h2 = 1.0 / (h * h);
        let m = n - 1;
        let diag: Vec<f64> = (0..m).map(|i| (k[i] + k[i + 1]) * inv_h2).collect();
        let off: Vec<f64> = (0..m.saturating_sub(1)).map(|i| -k[i + 1] * inv_h2).collect();
        let rhs: Vec<f64> = (0..m).map(|i| self.forcing.eval((i + 1) as f64 * h)).collect();
        let interior = solve_tridiagonal(&diag, &off, rhs).ok_or_else(|| Error::Solver {
            level,
            reason: "singular tridiagonal system".into(),
            theta: theta.to_vec(),
        })?;
        let mut u = Vec::with_capacity(n + 1);
        u.push(0.0);
        u.extend(interior);
        u.push(0.0);
        Ok(ForwardState {
            u,
            k,
            partials,
            cells: n,
        })
    }

    fn observe(&self, state: &ForwardState) -> Vec<f64> {
        self.observation_points
            .iter()
            .map(|&x| {
                let (c, w) = locate(x, state.cells);
                (1.0 - w) * state.u[c] + w * state.u[c + 1]
            })
            .collect()
    }

    /// Forward map on an arbitrary mesh of `cells` cells.
    pub fn forward_cells(&self, cells: usize, theta: &[f64]) -> Result<Vec<f64>> {
        if cells < 4 || cells < self.num_params - 1 {
            return Err(Error::Input(format!("mesh with {cells} cells is too coarse")));
        }
        let st = self.solve(cells, theta, 0)?;
        Ok(self.observe(&st))
    }

    /// `G^(ℓ)(θ)`: observations of the level-`ℓ` solution.
    pub fn forward_solve(&self, level: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_level(level)?;
        let st = self.solve(self.cells(level), theta, level)?;
        Ok(self.observe(&st))
    }

    fn misfit_of(&self, obs: &[f64]) -> f64 {
        obs.iter()
            .zip(&self.data)
            .zip(&self.noise_std)
            .map(|((g, y), s)| {
                let r = (y - g) / s;
                0.5 * r * r
            })
            .sum()
    }

    fn prior_log(&self, theta: &[f64]) -> f64 {
        -0.5 * theta
            .iter()
            .zip(&self.prior_mean)
            .map(|(t, m)| (t - m) * (t - m))
            .sum::<f64>()
            / self.prior_var
    }

    /// `Jᵀ v` for the level-`ℓ` forward map at the state `st`, via one adjoint solve.
    fn jacobian_transpose(&self, st: &ForwardState, v: &[f64], level: usize, theta: &[f64]) -> Result<Vec<f64>> {
        let n = st.cells;
        let m = n - 1;
        let h = 1.0 / n as f64;
        let inv_h2 = 1.0 / (h * h);
        // Bᵀ v on all nodes, then restricted to the interior.
        let mut btv = vec![0.0; n + 1];
        for (&x, vi) in self.observation_points.iter().zip(v) {
            let (c, w) = locate(x, n);
            btv[c] += (1.0 - w) * vi;
            btv[c + 1] += w * vi;
        }
        let diag: Vec<f64> = (0..m).map(|i| (st.k[i] + st.k[i + 1]) * inv_h2).collect();
        let off: Vec<f64> = (0..m.saturating_sub(1)).map(|i| -st.k[i + 1] * inv_h2).collect();
        let lam_int = solve_tridiagonal(&diag, &off, btv[1..n].to_vec()).ok_or_else(|| Error::Solver {
            level,
            reason: "singular adjoint system".into(),
            theta: theta.to_vec(),
        })?;
        let mut lam = Vec::with_capacity(n + 1);
        lam.push(0.0);
        lam.extend(lam_int);
        lam.push(0.0);

        let mut out = vec![0.0; self.num_params];
        for c in 0..n {
            let s = -(lam[c + 1] - lam[c]) * (st.u[c + 1] - st.u[c]) * inv_h2;
            for &(j, dk) in &st.partials[c] {
                out[j] += dk * s;
            }
        }
        Ok(out)
    }
}

/// Thomas algorithm for a symmetric tridiagonal system. Returns `None` on a
/// zero or non-finite pivot.
fn solve_tridiagonal(diag: &[f64], off: &[f64], mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut b = diag[0];
    if b == 0.0 || !b.is_finite() {
        return None;
    }
    rhs[0] /= b;
    for i in 1..m {
        c[i - 1] = off[i - 1] / b;
        b = diag[i] - off[i - 1] * c[i - 1];
        if b == 0.0 || !b.is_finite() {
            return None;
        }
        rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / b;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Some(rhs)
}

impl PosteriorHierarchy for EllipticInverseProblem {
    fn num_levels(&self) -> usize {
        self.num_levels
    }

    fn dimension(&self) -> usize {
        self.num_params
    }

    fn cost_weight(&self, level: usize) -> f64 {
        self.cost.weight(level)
    }

    fn log_density(&self, level: usize, theta: &[f64]) -> Result<f64> {
        Ok(-self.misfit(level, theta)? + self.prior_log(theta))
    }

    fn grad_log_density(&self, level: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_level(level)?;
        let st = self.solve(self.cells(level), theta, level)?;
        let obs = self.observe(&st);
        let weighted: Vec<f64> = obs
            .iter()
            .zip(&self.data)
            .zip(&self.noise_std)
            .map(|((g, y), s)| (y - g) / (s * s))
            .collect();
        let mut grad = self.jacobian_transpose(&st, &weighted, level, theta)?;
        for ((g, t), m) in grad.iter_mut().zip(theta).zip(&self.prior_mean) {
            *g -= (t - m) / self.prior_var;
        }
        Ok(grad)
    }
}

impl BayesianHierarchy for EllipticInverseProblem {
    fn prior_mean(&self) -> &[f64] {
        &self.prior_mean
    }

    fn prior_cholesky(&self) -> &DMatrix<f64> {
        self.prior_chol
            .as_ref()
            .expect("EllipticInverseProblem used without validated()")
    }

    fn forward(&self, level: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.forward_solve(level, theta)
    }

    fn misfit(&self, level: usize, theta: &[f64]) -> Result<f64> {
        let obs = self.forward_solve(level, theta)?;
        Ok(self.misfit_of(&obs))
    }
}

/// Log-coefficient profile of the benchmark truth on [0, 1]: a sine bump, a
/// linear ramp and a plateau.
fn benchmark_true_log_coefficient(x: f64) -> f64 {
    let v = if x < 0.5 {
        1.0 + (3.0 * std::f64::consts::PI * x).sin()
    } else if x < 0.8 {
        16.0 - 20.0 * x
    } else {
        1.0
    };
    (v + BENCHMARK_ZETA).ln()
}

/// Settings for the built-in elliptic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticBenchmark {
    pub seed: u64,
    pub levels: usize,
    #[serde(default = "default_coarse_cells")]
    pub coarse_cells: usize,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default)]
    pub cost: CostModel,
}

fn default_coarse_cells() -> usize {
    BENCHMARK_COARSE_CELLS
}
fn default_noise_std() -> f64 {
    BENCHMARK_NOISE_STD
}

impl EllipticBenchmark {
    pub fn new(seed: u64, levels: usize) -> Self {
        Self {
            seed,
            levels,
            coarse_cells: BENCHMARK_COARSE_CELLS,
            noise_std: BENCHMARK_NOISE_STD,
            cost: CostModel::default(),
        }
    }

    pub fn build(&self) -> Result<EllipticInverseProblem> {
        if self.levels < 2 {
            return Err(Error::Input(format!(
                "benchmark needs >= 2 levels, got {}",
                self.levels
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("noise_std must be >= 0".into()));
        }
        let d = BENCHMARK_NUM_PARAMS;
        let nodes: Vec<f64> = (0..d).map(|i| i as f64 / (d - 1) as f64).collect();
        let truth: Vec<f64> = nodes.iter().map(|&x| benchmark_true_log_coefficient(x)).collect();
        let prior_mean: Vec<f64> = truth
            .iter()
            .zip(&nodes)
            .map(|(t, x)| t + BENCHMARK_PERTURBATION * (2.0 * std::f64::consts::PI * x).cos())
            .collect();
        // sensors on coarse-mesh nodes in the right half, so every level
        // observes nodal values
        let obs: Vec<f64> = (0..BENCHMARK_NUM_OBS)
            .map(|j| (self.coarse_cells / 2 + 1 + 3 * j / 2) as f64 * (16.0 / self.coarse_cells as f64) / 16.0)
            .collect();
        // the likelihood needs strictly positive noise; a zero-noise instance
        // keeps exact data but uses the default std for Γ
        let gamma_std = if self.noise_std > 0.0 {
            self.noise_std
        } else {
            BENCHMARK_NOISE_STD
        };
        let mut p = EllipticInverseProblem::new(
            d,
            self.levels,
            self.coarse_cells,
            Forcing::Constant {
                value: BENCHMARK_FORCING,
            },
            obs.clone(),
            vec![gamma_std; obs.len()],
            vec![0.0; obs.len()],
            prior_mean,
            BENCHMARK_PRIOR_VAR,
            self.cost,
        )?;
        let fine = p.forward_cells(p.cells(self.levels + 1), &truth)?;
        let mut rng = stream(self.seed, Purpose::ProblemData, 0);
        let eta = standard_normal_vec(&mut rng, obs.len());
        p.data = fine.iter().zip(eta).map(|(g, e)| g + self.noise_std * e).collect();
        p.truth = Some(truth);
        Ok(p)
    }
}

/// The built-in benchmark: 25 parameters, 10 observations in the right half
/// of the domain, data generated one level finer than the finest inference
/// level.
pub fn make_benchmark_elliptic(seed: u64, levels: usize) -> Result<EllipticInverseProblem> {
    EllipticBenchmark::new(seed, levels).build()
}
