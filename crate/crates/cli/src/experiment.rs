//! Builds the configured problem, runs the configured algorithm and collects
//! diagnostics into a [`RunReport`].

use std::time::Instant;

use mlsvgd::diagnostics::{mmd_squared, relative_error, SampleSet};
use mlsvgd::hierarchy::{EllipticInverseProblem, GaussianLinearHierarchy};
use mlsvgd::kernel::median_heuristic;
use mlsvgd::mcmc::run_pcn;
use mlsvgd::mlsvgd::{run_mlsvgd, theoretical_schedule, LevelSchedule};
use mlsvgd::rng::{stream, Purpose};
use mlsvgd::svgd::{run_svgd, ParticleEnsemble, RunTrace, SvgdConfig};
use mlsvgd::{BayesianHierarchy, KernelSpec, Points};
use sha2::{Digest, Sha256};

use crate::config::{AlgorithmConfig, Bandwidth, ExperimentConfig, ProblemConfig, ScheduleConfig};
use crate::error::{CliError, Result};
use crate::reference::load_reference;
use crate::report::{LevelRecord, PcnSummary, RunReport, TraceRecord};

pub enum Problem {
    Gaussian(GaussianLinearHierarchy),
    Elliptic(EllipticInverseProblem),
}

impl Problem {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match &cfg.problem {
            ProblemConfig::GaussianLinear(p) => {
                Problem::Gaussian(ProblemConfig::gaussian_builder(p, cfg.seed, cfg.cost).build()?)
            }
            ProblemConfig::Elliptic1d(p) => {
                Problem::Elliptic(ProblemConfig::elliptic_benchmark(p, cfg.seed, cfg.cost).build()?)
            }
        })
    }

    pub fn hierarchy(&self) -> &dyn BayesianHierarchy {
        match self {
            Problem::Gaussian(h) => h,
            Problem::Elliptic(h) => h,
        }
    }
}

/// SHA-256 over the settings that determine the posterior hierarchy.
pub fn problem_hash(cfg: &ExperimentConfig) -> String {
    let key = serde_json::json!({
        "problem": cfg.problem,
        "seed": cfg.seed,
        "cost": cfg.cost,
    });
    hex_digest(key.to_string().as_bytes())
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve_bandwidth(b: Bandwidth, points: &Points) -> Result<f64> {
    match b {
        Bandwidth::Fixed(h) => Ok(h),
        Bandwidth::Rule(_) => Ok(median_heuristic(points)?),
    }
}

fn reference_mean(
    cfg: &ExperimentConfig,
    problem: &Problem,
    level: usize,
    notes: &mut Vec<String>,
) -> Option<Vec<f64>> {
    match problem {
        Problem::Gaussian(h) => match h.closed_form_posterior(level) {
            Ok((m, _)) => Some(m.as_slice().to_vec()),
            Err(e) => {
                notes.push(format!("relative error unavailable: {e}"));
                None
            }
        },
        Problem::Elliptic(_) => {
            let Some(path) = &cfg.diagnostics.reference_file else {
                notes.push("relative error unavailable: no reference file configured".into());
                return None;
            };
            match load_reference(path) {
                Ok(r) if r.problem_hash == problem_hash(cfg) && r.level == level => Some(r.mean),
                Ok(_) => {
                    notes.push(format!(
                        "relative error unavailable: {} was made for a different problem or level",
                        path.display()
                    ));
                    None
                }
                Err(e) => {
                    notes.push(format!("relative error unavailable: {e}"));
                    None
                }
            }
        }
    }
}

fn check_level(level: usize, levels: usize) -> Result<usize> {
    if level == 0 || level > levels {
        return Err(CliError::Config(format!("level {level} outside 1..={levels}")));
    }
    Ok(level)
}

fn schedule_for(cfg: &ExperimentConfig, schedule: &ScheduleConfig, tolerance: f64) -> Result<LevelSchedule> {
    let levels = cfg.problem.levels();
    let sched = match schedule {
        ScheduleConfig::Uniform => LevelSchedule::uniform(levels, tolerance)?,
        ScheduleConfig::Theoretical { k1, alpha, map } => {
            theoretical_schedule(*k1, cfg.cost.s, *alpha, tolerance)?.mapped(*map)?
        }
        ScheduleConfig::Explicit { levels, tolerances } => {
            LevelSchedule::new(levels.clone(), tolerances.clone(), tolerance)?
        }
    };
    if sched.finest() > levels {
        return Err(CliError::Config(format!(
            "algorithm.schedule needs level {} but the problem has {levels}",
            sched.finest()
        )));
    }
    Ok(sched)
}

fn trace_records(trace: &RunTrace, reference: Option<&[f64]>) -> Vec<TraceRecord> {
    trace
        .rows
        .iter()
        .map(|r| TraceRecord {
            iteration: r.iteration,
            level: r.level,
            grad_norm: Some(r.mean_gradient_norm),
            cost: r.accumulated_cost,
            wall_seconds: r.wall_seconds,
            rel_error: reference.and_then(|m| relative_error(&r.mean, m).ok()),
        })
        .collect()
}

fn level_records(trace: &RunTrace) -> Vec<LevelRecord> {
    let total = trace.final_cost();
    trace
        .levels
        .iter()
        .map(|l| LevelRecord {
            level: l.level,
            tolerance: l.tolerance,
            iterations: l.iterations,
            cost: l.cost,
            cost_share: if total > 0.0 { l.cost / total } else { 0.0 },
            tolerance_met: l.tolerance_met,
        })
        .collect()
}

struct Outcome {
    samples: Points,
    target_level: usize,
    bandwidth: Option<f64>,
    trace: Vec<TraceRecord>,
    levels: Vec<LevelRecord>,
    total_iterations: usize,
    total_cost: f64,
    tolerance_met: bool,
    pcn: Option<PcnSummary>,
}

fn run_particles(
    cfg: &ExperimentConfig,
    hier: &dyn BayesianHierarchy,
    reference: impl Fn(usize, &mut Vec<String>) -> Option<Vec<f64>>,
    notes: &mut Vec<String>,
) -> Result<Outcome> {
    let d = hier.dimension();
    let levels = hier.num_levels();
    let (particles, step, bw, tol, max_it) = match &cfg.algorithm {
        AlgorithmConfig::Svgd(p) => (p.particles, p.step_size, p.bandwidth, p.tolerance, p.max_iterations),
        AlgorithmConfig::Mlsvgd(p) => (p.particles, p.step_size, p.bandwidth, p.tolerance, p.max_iterations),
        AlgorithmConfig::Pcn(_) => unreachable!("pCN handled separately"),
    };
    let (schedule, target) = match &cfg.algorithm {
        AlgorithmConfig::Svgd(p) => {
            let level = check_level(p.level.unwrap_or(levels), levels)?;
            (None, level)
        }
        AlgorithmConfig::Mlsvgd(p) => {
            let s = schedule_for(cfg, &p.schedule, tol)?;
            let finest = s.finest();
            (Some(s), finest)
        }
        AlgorithmConfig::Pcn(_) => unreachable!(),
    };
    let first = schedule.as_ref().map_or(target, |s| s.levels()[0]);
    let init = ParticleEnsemble::standard_normal(particles, d, cfg.seed, first)?;
    let h = resolve_bandwidth(bw, init.particles())?;
    let svgd = SvgdConfig::new(step, KernelSpec::new(h, d)?, tol, max_it)?;
    let (ens, trace) = match &schedule {
        None => run_svgd(init, hier, target, &svgd)?,
        Some(s) => run_mlsvgd(init, hier, s, &svgd)?,
    };
    let reference = reference(target, notes);
    Ok(Outcome {
        samples: ens.particles().clone(),
        target_level: target,
        bandwidth: Some(h),
        trace: trace_records(&trace, reference.as_deref()),
        levels: level_records(&trace),
        total_iterations: trace.total_iterations(),
        total_cost: trace.final_cost(),
        tolerance_met: trace.tolerance_met()
            && schedule.as_ref().is_none_or(|s| trace.levels.len() == s.levels().len()),
        pcn: None,
    })
}

fn run_chains(cfg: &ExperimentConfig, hier: &dyn BayesianHierarchy) -> Result<Outcome> {
    let AlgorithmConfig::Pcn(p) = &cfg.algorithm else {
        unreachable!()
    };
    let level = check_level(p.level.unwrap_or(hier.num_levels()), hier.num_levels())?;
    let run = run_pcn(hier, level, &p.to_config(cfg.seed))?;
    let weight = hier.cost_weight(level);
    let mut trace = Vec::with_capacity(run.chains.len());
    let mut cost = 0.0;
    for c in &run.chains {
        cost += c.steps as f64 * weight;
        trace.push(TraceRecord {
            iteration: c.steps,
            level,
            grad_norm: None,
            cost,
            wall_seconds: 0.0,
            rel_error: None,
        });
    }
    Ok(Outcome {
        target_level: level,
        bandwidth: None,
        levels: vec![LevelRecord {
            level,
            tolerance: 0.0,
            iterations: run.chains.iter().map(|c| c.steps).sum(),
            cost,
            cost_share: 1.0,
            tolerance_met: true,
        }],
        total_iterations: run.chains.iter().map(|c| c.steps).sum(),
        total_cost: cost,
        tolerance_met: true,
        pcn: Some(PcnSummary {
            acceptance_rates: run.chains.iter().map(|c| c.acceptance_rate).collect(),
            mean_acceptance: run.mean_acceptance(),
            solver_failures: run.solver_failures(),
            retained_samples: run.samples.len(),
        }),
        samples: run.samples.samples,
        trace,
    })
}

fn mmd_against_exact(
    cfg: &ExperimentConfig,
    problem: &Problem,
    level: usize,
    samples: &Points,
    notes: &mut Vec<String>,
) -> Result<(Option<f64>, Option<f64>)> {
    let Some(n) = cfg.diagnostics.mmd_reference_draws else {
        return Ok((None, None));
    };
    let Problem::Gaussian(h) = problem else {
        notes.push("MMD unavailable: exact reference draws need a Gaussian problem".into());
        return Ok((None, None));
    };
    if samples.is_empty() {
        notes.push("MMD unavailable: no samples".into());
        return Ok((None, None));
    }
    let mut rng = stream(cfg.seed, Purpose::ReferenceDraws, 0);
    let reference = SampleSet::new(h.posterior_draws(level, n, &mut rng)?, "reference")?;
    let ours = SampleSet::new(samples.clone(), cfg.algorithm.name())?;
    let bw = match cfg.diagnostics.mmd_bandwidth {
        Bandwidth::Fixed(b) => b,
        Bandwidth::Rule(_) => {
            let mut pooled = ours.samples.clone();
            pooled.extend(&reference.samples)?;
            median_heuristic(&pooled)?
        }
    };
    let v = mmd_squared(&ours, &reference, &KernelSpec::new(bw, samples.dim())?)?;
    Ok((Some(v), Some(bw)))
}

/// Runs one experiment. Metrics without a reference are reported in
/// `notes` rather than failing the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let problem = Problem::build(cfg)?;
    let hier = problem.hierarchy();
    let mut notes = Vec::new();
    let clock = Instant::now();
    let out = match cfg.algorithm {
        AlgorithmConfig::Pcn(_) => run_chains(cfg, hier)?,
        _ => run_particles(
            cfg,
            hier,
            |level, notes| reference_mean(cfg, &problem, level, notes),
            &mut notes,
        )?,
    };
    let wall_seconds = clock.elapsed().as_secs_f64();
    let final_mean = if out.samples.is_empty() {
        Vec::new()
    } else {
        out.samples.mean()
    };
    let relative_error = if matches!(cfg.algorithm, AlgorithmConfig::Pcn(_)) {
        match reference_mean(cfg, &problem, out.target_level, &mut notes) {
            Some(m) if !final_mean.is_empty() => relative_error(&final_mean, &m).ok(),
            _ => None,
        }
    } else {
        out.trace.last().and_then(|r| r.rel_error)
    };
    let (mmd, mmd_bw) = mmd_against_exact(cfg, &problem, out.target_level, &out.samples, &mut notes)?;
    Ok(RunReport {
        label: cfg.algorithm.name().to_string(),
        config: cfg.clone(),
        algorithm: cfg.algorithm.name().to_string(),
        dimension: hier.dimension(),
        target_level: out.target_level,
        bandwidth: out.bandwidth,
        total_iterations: out.total_iterations,
        total_cost: out.total_cost,
        wall_seconds,
        tolerance_met: out.tolerance_met,
        levels: out.levels,
        final_mean,
        relative_error,
        mmd_squared: mmd,
        mmd_bandwidth: mmd_bw,
        pcn: out.pcn,
        notes,
        trace: out.trace,
        particles: Some(out.samples),
    })
}
