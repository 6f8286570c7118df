//! Preconditioned Crank–Nicolson sampling for reference posterior moments and
//! reference sample sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::SampleSet;
use crate::error::{check_dim, Error, Result};
use crate::hierarchy::{standard_normal_vec, BayesianHierarchy};
use crate::par;
use crate::points::Points;
use crate::rng::{stream, Purpose, StreamRng};

/// Number of batches used by [`batch_means_se`].
pub const BATCH_COUNT: usize = 32;

/// Attempts at drawing a chain start with a finite misfit.
const MAX_INIT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcnConfig {
    pub beta: f64,
    pub burn_in: usize,
    /// Retained samples per chain.
    pub num_samples: usize,
    pub thinning: usize,
    pub num_chains: usize,
    pub seed: u64,
}

impl PcnConfig {
    /// Reference-mean protocol: 100 chains, 10 000 burn-in steps each,
    /// `10⁵` retained samples per chain, `β = 0.01`.
    pub fn reference_mean(seed: u64) -> Self {
        Self {
            beta: 0.01,
            burn_in: 10_000,
            num_samples: 100_000,
            thinning: 1,
            num_chains: 100,
            seed,
        }
    }

    /// Reference-sample protocol for MMD: one chain, 20 000 burn-in steps,
    /// then every 5th of 100 000 steps, `β = 0.01`.
    pub fn mmd_reference(seed: u64) -> Self {
        Self {
            beta: 0.01,
            burn_in: 20_000,
            num_samples: 20_000,
            thinning: 5,
            num_chains: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("pCN beta must lie in (0, 1], got {}", self.beta)));
        }
        if self.thinning == 0 {
            return Err(Error::Config("pCN thinning must be >= 1".into()));
        }
        if self.num_chains == 0 {
            return Err(Error::Config("pCN needs at least one chain".into()));
        }
        Ok(())
    }

    /// Steps taken by each chain, burn-in included.
    pub fn steps_per_chain(&self) -> usize {
        self.burn_in + self.num_samples * self.thinning
    }
}

/// Outcome of one pCN transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Rejected,
    /// The forward model failed at the proposal; counted as a rejection.
    SolverFailure,
}

/// A single chain: current state, cached misfit `Φ_ℓ(θ)` and counters.
#[derive(Debug, Clone)]
pub struct PcnChain {
    state: Vec<f64>,
    misfit: f64,
    level: usize,
    beta: f64,
    steps: usize,
    accepted: usize,
    failures: usize,
}

impl PcnChain {
    pub fn new<H: BayesianHierarchy + ?Sized>(hier: &H, level: usize, beta: f64, state: Vec<f64>) -> Result<Self> {
        hier.check_level(level)?;
        check_dim(hier.dimension(), state.len())?;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Config(format!("pCN beta must lie in (0, 1], got {beta}")));
        }
        let misfit = hier.misfit(level, &state)?;
        if !misfit.is_finite() {
            return Err(Error::Degenerate("initial misfit is not finite".into()));
        }
        Ok(Self {
            state,
            misfit,
            level,
            beta,
            steps: 0,
            accepted: 0,
            failures: 0,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn misfit(&self) -> f64 {
        self.misfit
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn accepted(&self) -> usize {
        self.accepted
    }

    pub fn solver_failures(&self) -> usize {
        self.failures
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    /// Proposes `θ′ = m₀ + √(1−β²)(θ − m₀) + βξ`, `ξ ~ N(0, Σ₀)`, and accepts
    /// with probability `min(1, exp(Φ(θ) − Φ(θ′)))`.
    pub fn step<H: BayesianHierarchy + ?Sized>(&mut self, hier: &H, rng: &mut StreamRng) -> Result<StepOutcome> {
        let d = self.state.len();
        let m0 = hier.prior_mean();
        let l = hier.prior_cholesky();
        let z = standard_normal_vec(rng, d);
        let u: f64 = rng.random();
        let rho = (1.0 - self.beta * self.beta).sqrt();
        let proposal: Vec<f64> = (0..d)
            .map(|i| {
                let xi: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                m0[i] + rho * (self.state[i] - m0[i]) + self.beta * xi
            })
            .collect();
        self.steps += 1;
        let phi = match hier.misfit(self.level, &proposal) {
            Ok(phi) if phi.is_finite() => phi,
            Ok(_) | Err(Error::Solver { .. }) | Err(Error::Divergence { .. }) => {
                self.failures += 1;
                return Ok(StepOutcome::SolverFailure);
            }
            Err(e) => return Err(e),
        };
        if u.ln() < self.misfit - phi {
            self.state = proposal;
            self.misfit = phi;
            self.accepted += 1;
            Ok(StepOutcome::Accepted)
        } else {
            Ok(StepOutcome::Rejected)
        }
    }
}

/// One pCN transition from `state`. Returns the next state and whether the
/// proposal was accepted; a forward-model failure counts as a rejection.
pub fn pcn_step<H: BayesianHierarchy + ?Sized>(
    state: &[f64],
    hier: &H,
    level: usize,
    beta: f64,
    rng: &mut StreamRng,
) -> Result<(Vec<f64>, bool)> {
    let mut chain = PcnChain::new(hier, level, beta, state.to_vec())?;
    let outcome = chain.step(hier, rng)?;
    Ok((chain.state, outcome == StepOutcome::Accepted))
}

/// Per-chain counters of a [`run_pcn`] call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub steps: usize,
    pub accepted: usize,
    pub solver_failures: usize,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcnRun {
    /// Retained states, chain by chain in chain-index order.
    pub samples: SampleSet,
    pub chains: Vec<ChainStats>,
}

impl PcnRun {
    pub fn mean_acceptance(&self) -> f64 {
        self.chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / self.chains.len() as f64
    }

    pub fn solver_failures(&self) -> usize {
        self.chains.iter().map(|c| c.solver_failures).sum()
    }
}

fn run_chain<H: BayesianHierarchy + ?Sized>(
    hier: &H,
    level: usize,
    cfg: &PcnConfig,
    index: usize,
) -> Result<(Vec<f64>, ChainStats)> {
    let mut rng = stream(cfg.seed, Purpose::PcnChain, index as u32);
    let mut chain = None;
    for _ in 0..MAX_INIT_ATTEMPTS {
        let start = hier.sample_prior(&mut rng);
        match PcnChain::new(hier, level, cfg.beta, start) {
            Ok(c) => {
                chain = Some(c);
                break;
            }
            Err(Error::Solver { .. } | Error::Degenerate(_) | Error::Divergence { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let mut chain =
        chain.ok_or_else(|| Error::Degenerate(format!("chain {index}: no prior draw with a finite misfit")))?;
    for _ in 0..cfg.burn_in {
        chain.step(hier, &mut rng)?;
    }
    let mut kept = Vec::with_capacity(cfg.num_samples * chain.state.len());
    for _ in 0..cfg.num_samples {
        for _ in 0..cfg.thinning {
            chain.step(hier, &mut rng)?;
        }
        kept.extend_from_slice(&chain.state);
    }
    let stats = ChainStats {
        steps: chain.steps,
        accepted: chain.accepted,
        solver_failures: chain.failures,
        acceptance_rate: chain.acceptance_rate(),
    };
    Ok((kept, stats))
}

/// Runs `cfg.num_chains` independent chains in parallel from prior draws,
/// discards burn-in, thins, and concatenates the retained states.
pub fn run_pcn<H: BayesianHierarchy + ?Sized>(hier: &H, level: usize, cfg: &PcnConfig) -> Result<PcnRun> {
    cfg.validate()?;
    hier.check_level(level)?;
    if cfg.num_chains > u32::MAX as usize {
        return Err(Error::Config("too many chains".into()));
    }
    let results = par::try_map_indexed(cfg.num_chains, |c| run_chain(hier, level, cfg, c))?;
    let mut data = Vec::new();
    let mut chains = Vec::with_capacity(results.len());
    for (kept, stats) in results {
        data.extend(kept);
        chains.push(stats);
    }
    let samples = Points::new(hier.dimension(), data)?;
    let mut set = SampleSet::new(samples, "pcn")?
        .with_meta("sampler", "pcn")
        .with_meta("level", level)
        .with_meta("beta", cfg.beta)
        .with_meta("burn_in", cfg.burn_in)
        .with_meta("thinning", cfg.thinning)
        .with_meta("num_chains", cfg.num_chains)
        .with_meta("seed", cfg.seed);
    let run = PcnRun {
        samples: set.clone(),
        chains,
    };
    set = set.with_meta("acceptance_rate", run.mean_acceptance());
    Ok(PcnRun { samples: set, ..run })
}

/// Batch-means standard error of the mean of `series` with
/// [`BATCH_COUNT`] batches. Leading samples beyond a multiple of the batch
/// count are dropped.
pub fn batch_means_se(series: &[f64]) -> Result<f64> {
    let b = series.len() / BATCH_COUNT;
    if b < 2 {
        return Err(Error::Input(format!(
            "batch means need at least {} samples, got {}",
            2 * BATCH_COUNT,
            series.len()
        )));
    }
    let tail = &series[series.len() - b * BATCH_COUNT..];
    let means: Vec<f64> = tail.chunks(b).map(|c| c.iter().sum::<f64>() / b as f64).collect();
    let grand = means.iter().sum::<f64>() / BATCH_COUNT as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (BATCH_COUNT - 1) as f64;
    Ok((var / BATCH_COUNT as f64).sqrt())
}

/// Sample mean and batch-means standard error of every coordinate.
pub fn mean_with_se(samples: &Points) -> Result<(Vec<f64>, Vec<f64>)> {
    let mean = samples.mean();
    let se = (0..samples.dim())
        .map(|k| {
            let col: Vec<f64> = samples.rows().map(|r| r[k]).collect();
            batch_means_se(&col)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((mean, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{GaussianLinearHierarchy, PosteriorHierarchy};
    use nalgebra::DMatrix;

    /// `Φ ≡ 0` with prior `N(m₀, diag(var))`.
    struct PriorOnly {
        mean: Vec<f64>,
        chol: DMatrix<f64>,
    }

    impl PriorOnly {
        fn new(mean: Vec<f64>, var: &[f64]) -> Self {
            let chol = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                var.len(),
                var.iter().map(|v| v.sqrt()),
            ));
            Self { mean, chol }
        }
    }

    impl PosteriorHierarchy for PriorOnly {
        fn num_levels(&self) -> usize {
            1
        }
        fn dimension(&self) -> usize {
            self.mean.len()
        }
        fn cost_weight(&self, level: usize) -> f64 {
            level as f64
        }
        fn log_density(&self, _: usize, _: &[f64]) -> Result<f64> {
            unimplemented!()
        }
        fn grad_log_density(&self, _: usize, _: &[f64]) -> Result<Vec<f64>> {
            unimplemented!()
        }
    }

    impl BayesianHierarchy for PriorOnly {
        fn prior_mean(&self) -> &[f64] {
            &self.mean
        }
        fn prior_cholesky(&self) -> &DMatrix<f64> {
            &self.chol
        }
        fn forward(&self, _: usize, _: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![])
        }
        fn misfit(&self, _: usize, _: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
    }

    /// Misfit that fails whenever the first coordinate is positive.
    struct HalfBroken(PriorOnly);

    impl PosteriorHierarchy for HalfBroken {
        fn num_levels(&self) -> usize {
            1
        }
        fn dimension(&self) -> usize {
            self.0.dimension()
        }
        fn cost_weight(&self, level: usize) -> f64 {
            level as f64
        }
        fn log_density(&self, _: usize, _: &[f64]) -> Result<f64> {
            unimplemented!()
        }
        fn grad_log_density(&self, _: usize, _: &[f64]) -> Result<Vec<f64>> {
            unimplemented!()
        }
    }

    impl BayesianHierarchy for HalfBroken {
        fn prior_mean(&self) -> &[f64] {
            self.0.prior_mean()
        }
        fn prior_cholesky(&self) -> &DMatrix<f64> {
            self.0.prior_cholesky()
        }
        fn forward(&self, _: usize, _: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![])
        }
        fn misfit(&self, level: usize, theta: &[f64]) -> Result<f64> {
            if theta[0] > 0.0 {
                Err(Error::Solver {
                    level,
                    reason: "test".into(),
                    theta: theta.to_vec(),
                })
            } else {
                Ok(0.0)
            }
        }
    }

    fn scalar_problem() -> GaussianLinearHierarchy {
        GaussianLinearHierarchy::scalar(1.0, 1.0, 1.0, 0.0, 1.0, 1).unwrap()
    }

    #[test]
    fn beta_one_gives_independent_prior_draws() {
        let h = PriorOnly::new(vec![3.0], &[4.0]);
        let mut a = stream(1, Purpose::Auxiliary, 0);
        let mut b = a.clone();
        let (next, acc) = pcn_step(&[100.0], &h, 1, 1.0, &mut a).unwrap();
        assert!(acc);
        let z = standard_normal_vec(&mut b, 1);
        assert_eq!(next, vec![3.0 + 2.0 * z[0]]);
    }

    #[test]
    fn zero_likelihood_accepts_everything() {
        let h = PriorOnly::new(vec![0.0, 1.0], &[1.0, 2.0]);
        let mut rng = stream(2, Purpose::Auxiliary, 0);
        let mut chain = PcnChain::new(&h, 1, 0.3, vec![0.0, 0.0]).unwrap();
        for _ in 0..1000 {
            assert_eq!(chain.step(&h, &mut rng).unwrap(), StepOutcome::Accepted);
        }
        assert_eq!(chain.acceptance_rate(), 1.0);
    }

    #[test]
    fn solver_failures_count_as_rejections() {
        let h = HalfBroken(PriorOnly::new(vec![-1.0], &[1.0]));
        let mut rng = stream(3, Purpose::Auxiliary, 0);
        let mut chain = PcnChain::new(&h, 1, 1.0, vec![-1.0]).unwrap();
        for _ in 0..2000 {
            chain.step(&h, &mut rng).unwrap();
            assert!(chain.state()[0] <= 0.0);
        }
        let f = chain.solver_failures() as f64 / 2000.0;
        assert!((f - 0.1587).abs() < 0.03, "failure fraction {f}");
        assert_eq!(chain.accepted() + chain.solver_failures(), chain.steps());
    }

    /// Stationary acceptance rate for `Φ(θ) = ½(1 − θ)²`, prior `N(0, 1)`:
    /// `∫∫ π(θ) q(θ′|θ) min(1, e^{Φ(θ) − Φ(θ′)}) dθ dθ′` with posterior `N(½, ½)`.
    fn acceptance_quadrature(beta: f64) -> f64 {
        let rho = (1.0 - beta * beta).sqrt();
        let phi = |t: f64| 0.5 * (1.0 - t) * (1.0 - t);
        let n = 1200;
        let (lo, hi) = (-8.0, 8.0);
        let dx = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let t = lo + (i as f64 + 0.5) * dx;
            let post = (-(t - 0.5) * (t - 0.5)).exp() / std::f64::consts::PI.sqrt();
            for j in 0..n {
                let z = lo + (j as f64 + 0.5) * dx;
                let g = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let tp = rho * t + beta * z;
                total += post * g * (phi(t) - phi(tp)).exp().min(1.0) * dx * dx;
            }
        }
        total
    }

    #[test]
    fn acceptance_matches_quadrature() {
        let h = scalar_problem();
        let beta = 0.8;
        let expect = acceptance_quadrature(beta);
        let mut rng = stream(4, Purpose::Auxiliary, 0);
        let mut chain = PcnChain::new(&h, 1, beta, vec![0.5]).unwrap();
        for _ in 0..1000 {
            chain.step(&h, &mut rng).unwrap();
        }
        let flags: Vec<f64> = (0..100_000)
            .map(|_| (chain.step(&h, &mut rng).unwrap() == StepOutcome::Accepted) as u8 as f64)
            .collect();
        let rate = flags.iter().sum::<f64>() / flags.len() as f64;
        let se = batch_means_se(&flags).unwrap();
        assert!((rate - expect).abs() < 2.0 * se, "rate {rate} vs {expect} (se {se})");
    }

    #[test]
    fn empty_run_is_valid() {
        let cfg = PcnConfig {
            beta: 0.5,
            burn_in: 10,
            num_samples: 0,
            thinning: 1,
            num_chains: 3,
            seed: 1,
        };
        let run = run_pcn(&scalar_problem(), 1, &cfg).unwrap();
        assert!(run.samples.is_empty());
        assert_eq!(run.chains.len(), 3);
        assert_eq!(run.chains[0].steps, 10);
    }

    #[test]
    fn prior_only_matches_prior_moments() {
        let h = PriorOnly::new(vec![1.0, -2.0], &[1.0, 0.25]);
        let cfg = PcnConfig {
            beta: 0.3,
            burn_in: 0,
            num_samples: 20_000,
            thinning: 1,
            num_chains: 1,
            seed: 5,
        };
        let run = run_pcn(&h, 1, &cfg).unwrap();
        let (mean, se) = mean_with_se(&run.samples.samples).unwrap();
        for k in 0..2 {
            assert!(
                (mean[k] - h.mean[k]).abs() < 3.0 * se[k],
                "coord {k}: {} ± {}",
                mean[k],
                se[k]
            );
        }
        let cov = run.samples.samples.covariance();
        assert!((cov[0] - 1.0).abs() < 0.1 && (cov[3] - 0.25).abs() < 0.025, "{cov:?}");
        assert!(cov[1].abs() < 0.05);
    }

    #[test]
    fn scalar_posterior_mean_recovered() {
        let h = scalar_problem();
        let cfg = PcnConfig {
            beta: 0.5,
            burn_in: 1000,
            num_samples: 20_000,
            thinning: 1,
            num_chains: 4,
            seed: 6,
        };
        let run = run_pcn(&h, 1, &cfg).unwrap();
        let (mean, se) = mean_with_se(&run.samples.samples).unwrap();
        let (exact, var) = h.closed_form_posterior(1).unwrap();
        assert!((exact[0] - 0.5).abs() < 1e-14);
        assert!((mean[0] - 0.5).abs() < 3.0 * se[0], "{} ± {}", mean[0], se[0]);
        let second: Vec<f64> = run.samples.samples.rows().map(|r| r[0] * r[0]).collect();
        let m2 = second.iter().sum::<f64>() / second.len() as f64;
        let se2 = batch_means_se(&second).unwrap();
        assert!((m2 - (var[(0, 0)] + 0.25)).abs() < 3.0 * se2, "{m2} ± {se2}");
    }

    #[test]
    fn acceptance_nonincreasing_in_beta() {
        let h = scalar_problem();
        let mut inversions = 0;
        for seed in 0..4 {
            let rates: Vec<f64> = [0.01, 0.1, 0.5, 1.0]
                .iter()
                .map(|&beta| {
                    let cfg = PcnConfig {
                        beta,
                        burn_in: 200,
                        num_samples: 4000,
                        thinning: 1,
                        num_chains: 1,
                        seed,
                    };
                    run_pcn(&h, 1, &cfg).unwrap().mean_acceptance()
                })
                .collect();
            inversions += rates.windows(2).filter(|w| w[1] > w[0]).count();
        }
        assert!(inversions <= 1);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let h = scalar_problem();
        let cfg = PcnConfig {
            beta: 0.2,
            burn_in: 50,
            num_samples: 100,
            thinning: 3,
            num_chains: 5,
            seed: 9,
        };
        let a = run_pcn(&h, 1, &cfg).unwrap();
        let b = par::with_threads(1, || run_pcn(&h, 1, &cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 500);
        assert_eq!(a.chains[0].steps, 350);
        assert_eq!(a.samples.metadata["thinning"], "3");
    }

    #[test]
    fn config_validation() {
        let mut cfg = PcnConfig::mmd_reference(0);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.steps_per_chain(), 120_000);
        assert_eq!(
            PcnConfig::reference_mean(0).num_chains * PcnConfig::reference_mean(0).num_samples,
            10_000_000
        );
        cfg.beta = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.beta = 1.5;
        assert!(cfg.validate().is_err());
        cfg.beta = 0.5;
        cfg.thinning = 0;
        assert!(cfg.validate().is_err());
        assert!(matches!(
            run_pcn(&scalar_problem(), 2, &PcnConfig::mmd_reference(0)),
            Err(Error::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn batch_means_of_iid_series() {
        assert!(batch_means_se(&[1.0; 10]).is_err());
        assert_eq!(batch_means_se(&[2.0; 640]).unwrap(), 0.0);
        let mut rng = stream(10, Purpose::Auxiliary, 0);
        let xs = standard_normal_vec(&mut rng, 64_000);
        let se = batch_means_se(&xs).unwrap();
        assert!((se / (1.0 / 64_000f64.sqrt()) - 1.0).abs() < 0.4);
    }
}
