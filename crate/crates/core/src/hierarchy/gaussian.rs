use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{cholesky, standard_normal_vec, BayesianHierarchy, CostModel, PosteriorHierarchy};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::points::Points;
use crate::rng::{stream, Purpose, StreamRng};

/// Linear-Gaussian inverse problem `y = A θ + η`, `η ~ N(0, Γ)`, `θ ~ N(m₀, Σ₀)`,
/// with level-`ℓ` surrogates that replace `A` by `A_ℓ`.
///
/// Every level posterior is Gaussian and available in closed form.
#[derive(Debug, Clone)]
pub struct GaussianLinearHierarchy {
    prior_mean: DVector<f64>,
    prior_cov: DMatrix<f64>,
    prior_chol: DMatrix<f64>,
    prior_precision: DMatrix<f64>,
    level_matrices: Vec<DMatrix<f64>>,
    limit_matrix: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
    noise_precision: DMatrix<f64>,
    data: DVector<f64>,
    decay: Option<(f64, f64, f64)>,
    cost: CostModel,
    prior_mean_vec: Vec<f64>,
}

impl GaussianLinearHierarchy {
    /// Assembles a hierarchy from explicit matrices. No decay relation between
    /// `A_ℓ` and `A` is implied; use [`GaussianLinearBuilder`] for that.
    pub fn from_parts(
        prior_mean: DVector<f64>,
        prior_cov: DMatrix<f64>,
        level_matrices: Vec<DMatrix<f64>>,
        limit_matrix: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
        data: DVector<f64>,
        cost: CostModel,
    ) -> Result<Self> {
        let d = prior_mean.len();
        let q = data.len();
        if d == 0 || q == 0 {
            return Err(Error::Config("empty parameter or data vector".into()));
        }
        if level_matrices.is_empty() {
            return Err(Error::Config("at least one level is required".into()));
        }
        check_dim(d, prior_cov.nrows())?;
        check_dim(q, noise_cov.nrows())?;
        for a in level_matrices.iter().chain(std::iter::once(&limit_matrix)) {
            if a.shape() != (q, d) {
                return Err(Error::Config(format!(
                    "observation matrix has shape {:?}, expected ({q}, {d})",
                    a.shape()
                )));
            }
        }
        let prior_c = cholesky(&prior_cov, "prior covariance")?;
        let noise_c = cholesky(&noise_cov, "noise covariance")?;
        Ok(Self {
            prior_chol: prior_c.l(),
            prior_precision: prior_c.inverse(),
            noise_precision: noise_c.inverse(),
            prior_mean_vec: prior_mean.iter().copied().collect(),
            prior_mean,
            prior_cov,
            level_matrices,
            limit_matrix,
            noise_cov,
            data,
            decay: None,
            cost,
        })
    }

    /// `d = q = 1` problem with `A_ℓ = a` at every level.
    pub fn scalar(a: f64, noise_var: f64, prior_var: f64, prior_mean: f64, y: f64, levels: usize) -> Result<Self> {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        Self::from_parts(
            DVector::from_element(1, prior_mean),
            m(prior_var),
            vec![m(a); levels],
            m(a),
            m(noise_var),
            DVector::from_element(1, y),
            CostModel::default(),
        )
    }

    pub fn level_matrix(&self, level: usize) -> Result<&DMatrix<f64>> {
        self.check_level(level)?;
        Ok(&self.level_matrices[level - 1])
    }

    pub fn limit_matrix(&self) -> &DMatrix<f64> {
        &self.limit_matrix
    }

    pub fn prior_cov(&self) -> &DMatrix<f64> {
        &self.prior_cov
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    /// `(b₀, s, α)` when built with a planted decay `‖A − A_ℓ‖_F = b₀ s^(−αℓ)`.
    pub fn decay(&self) -> Option<(f64, f64, f64)> {
        self.decay
    }

    /// `‖A − A_ℓ‖_F`.
    pub fn operator_error(&self, level: usize) -> Result<f64> {
        Ok((&self.limit_matrix - self.level_matrix(level)?).norm())
    }

    /// Limit forward map `G(θ) = A θ`.
    pub fn forward_limit(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension(), theta.len())?;
        Ok((&self.limit_matrix * DVector::from_column_slice(theta))
            .iter()
            .copied()
            .collect())
    }

    fn posterior_for(&self, a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let at_gi = a.transpose() * &self.noise_precision;
        let precision = &at_gi * a + &self.prior_precision;
        let precision = 0.5 * (&precision + precision.transpose());
        let chol = cholesky(&precision, "posterior precision")?;
        let rhs = &at_gi * &self.data + &self.prior_precision * &self.prior_mean;
        let mean = chol.solve(&rhs);
        let cov = chol.inverse();
        Ok((mean, 0.5 * (&cov + cov.transpose())))
    }

    /// Posterior `N(m_post, Σ_post)` at `level`:
    /// `Σ_post = (A_ℓᵀΓ⁻¹A_ℓ + Σ₀⁻¹)⁻¹`, `m_post = Σ_post(A_ℓᵀΓ⁻¹y + Σ₀⁻¹m₀)`.
    pub fn closed_form_posterior(&self, level: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let a = self.level_matrix(level)?.clone();
        self.posterior_for(&a)
    }

    /// Posterior under the limit operator `A`.
    pub fn limit_posterior(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.posterior_for(&self.limit_matrix.clone())
    }

    /// `n` exact draws from the level-`ℓ` posterior.
    pub fn posterior_draws(&self, level: usize, n: usize, rng: &mut StreamRng) -> Result<Points> {
        let (mean, cov) = self.closed_form_posterior(level)?;
        let l = cholesky(&cov, "posterior covariance")?.l();
        let d = mean.len();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let z = DVector::from_vec(standard_normal_vec(rng, d));
            data.extend((&mean + &l * z).iter());
        }
        Points::new(d, data)
    }

    fn residual(&self, level: usize, theta: &[f64]) -> Result<DVector<f64>> {
        self.check_level(level)?;
        check_dim(self.dimension(), theta.len())?;
        check_finite(theta)?;
        let th = DVector::from_column_slice(theta);
        Ok(&self.data - &self.level_matrices[level - 1] * th)
    }

    fn prior_term(&self, theta: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let diff = DVector::from_column_slice(theta) - &self.prior_mean;
        let pd = &self.prior_precision * &diff;
        (diff, pd)
    }
}

impl PosteriorHierarchy for GaussianLinearHierarchy {
    fn num_levels(&self) -> usize {
        self.level_matrices.len()
    }

    fn dimension(&self) -> usize {
        self.prior_mean.len()
    }

    fn cost_weight(&self, level: usize) -> f64 {
        self.cost.weight(level)
    }

    fn log_density(&self, level: usize, theta: &[f64]) -> Result<f64> {
        let misfit = self.misfit(level, theta)?;
        let (diff, pd) = self.prior_term(theta);
        Ok(-misfit - 0.5 * diff.dot(&pd))
    }

    fn grad_log_density(&self, level: usize, theta: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(level, theta)?;
        let (_, pd) = self.prior_term(theta);
        let g = self.level_matrices[level - 1].transpose() * (&self.noise_precision * r) - pd;
        Ok(g.iter().copied().collect())
    }
}

impl BayesianHierarchy for GaussianLinearHierarchy {
    fn prior_mean(&self) -> &[f64] {
        &self.prior_mean_vec
    }

    fn prior_cholesky(&self) -> &DMatrix<f64> {
        &self.prior_chol
    }

    fn forward(&self, level: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_level(level)?;
        check_dim(self.dimension(), theta.len())?;
        let th = DVector::from_column_slice(theta);
        Ok((&self.level_matrices[level - 1] * th).iter().copied().collect())
    }

    fn misfit(&self, level: usize, theta: &[f64]) -> Result<f64> {
        let r = self.residual(level, theta)?;
        Ok(0.5 * r.dot(&(&self.noise_precision * &r)))
    }
}

/// Random linear-Gaussian hierarchy with planted operator decay
/// `‖A − A_ℓ‖_F = b₀ s^(−αℓ)` exactly.
///
/// `A` has i.i.d. `N(0, 1/d)` entries, the perturbation direction is a random
/// unit-Frobenius matrix, the truth is a prior draw, and `y = Aθ* + η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianLinearBuilder {
    pub dim: usize,
    pub obs_dim: usize,
    pub levels: usize,
    pub seed: u64,
    #[serde(default = "default_b0")]
    pub b0: f64,
    #[serde(default = "default_s")]
    pub decay_base: f64,
    #[serde(default = "default_alpha")]
    pub decay_rate: f64,
    #[serde(default = "default_prior_var")]
    pub prior_var: f64,
    #[serde(default = "default_noise_var")]
    pub noise_var: f64,
    #[serde(default = "default_prior_mean")]
    pub prior_mean: f64,
    #[serde(default)]
    pub cost: CostModel,
}

fn default_b0() -> f64 {
    1.0
}
fn default_s() -> f64 {
    2.0
}
fn default_alpha() -> f64 {
    1.0
}
fn default_prior_var() -> f64 {
    1.0
}
fn default_noise_var() -> f64 {
    0.1
}
fn default_prior_mean() -> f64 {
    1.0
}

impl GaussianLinearBuilder {
    pub fn new(dim: usize, obs_dim: usize, levels: usize, seed: u64) -> Self {
        Self {
            dim,
            obs_dim,
            levels,
            seed,
            b0: default_b0(),
            decay_base: default_s(),
            decay_rate: default_alpha(),
            prior_var: default_prior_var(),
            noise_var: default_noise_var(),
            prior_mean: default_prior_mean(),
            cost: CostModel::default(),
        }
    }

    pub fn decay(mut self, b0: f64, s: f64, alpha: f64) -> Self {
        self.b0 = b0;
        self.decay_base = s;
        self.decay_rate = alpha;
        self
    }

    pub fn variances(mut self, prior_var: f64, noise_var: f64) -> Self {
        self.prior_var = prior_var;
        self.noise_var = noise_var;
        self
    }

    pub fn cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    pub fn build(&self) -> Result<GaussianLinearHierarchy> {
        let (d, q) = (self.dim, self.obs_dim);
        if d == 0 || q == 0 || self.levels == 0 {
            return Err(Error::Config("dim, obs_dim and levels must be >= 1".into()));
        }
        if !(self.b0 >= 0.0 && self.decay_base > 1.0 && self.decay_rate > 0.0) {
            return Err(Error::Config("decay needs b0 >= 0, s > 1, alpha > 0".into()));
        }
        if !(self.prior_var > 0.0 && self.noise_var > 0.0) {
            return Err(Error::Config("variances must be positive".into()));
        }
        CostModel::new(self.cost.c0, self.cost.s, self.cost.gamma)?;

        let mut op_rng = stream(self.seed, Purpose::ProblemOperator, 0);
        let scale = 1.0 / (d as f64).sqrt();
        let a_vals = standard_normal_vec(&mut op_rng, q * d);
        let limit = DMatrix::from_row_slice(q, d, &a_vals) * scale;
        let e_vals = standard_normal_vec(&mut op_rng, q * d);
        let mut direction = DMatrix::from_row_slice(q, d, &e_vals);
        let n = direction.norm();
        direction /= n;

        let level_matrices = (1..=self.levels)
            .map(|l| {
                let err = self.b0 * self.decay_base.powf(-self.decay_rate * l as f64);
                &limit + &direction * err
            })
            .collect();

        let prior_mean = DVector::from_element(d, self.prior_mean);
        let prior_cov = DMatrix::identity(d, d) * self.prior_var;
        let noise_cov = DMatrix::identity(q, q) * self.noise_var;

        let mut data_rng = stream(self.seed, Purpose::ProblemData, 0);
        let z = standard_normal_vec(&mut data_rng, d);
        let truth = &prior_mean + DVector::from_vec(z) * self.prior_var.sqrt();
        let eta = DVector::from_vec(standard_normal_vec(&mut data_rng, q)) * self.noise_var.sqrt();
        let data = &limit * truth + eta;

        let mut h = GaussianLinearHierarchy::from_parts(
            prior_mean,
            prior_cov,
            level_matrices,
            limit,
            noise_cov,
            data,
            self.cost,
        )?;
        h.decay = Some((self.b0, self.decay_base, self.decay_rate));
        Ok(h)
    }
}
