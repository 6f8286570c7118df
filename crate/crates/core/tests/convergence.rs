//! End-to-end SVGD and MLSVGD behaviour on the Gaussian and elliptic hierarchies.

use mlsvgd::diagnostics::relative_error;
use mlsvgd::hierarchy::{make_benchmark_elliptic, GaussianLinearBuilder};
use mlsvgd::mlsvgd::{run_mlsvgd, LevelSchedule};
use mlsvgd::svgd::{run_svgd, svgd_step, ParticleEnsemble, RunTrace, SvgdConfig};
use mlsvgd::KernelSpec;

fn config(dim: usize, tolerance: f64) -> SvgdConfig {
    SvgdConfig::new(0.05, KernelSpec::new(0.1, dim).unwrap(), tolerance, 100_000).unwrap()
}

#[test]
fn gaussian_means_converge_to_closed_form() {
    for seed in [0u64, 1] {
        let h = GaussianLinearBuilder::new(2, 4, 3, seed).build().unwrap();
        let (mean, _) = h.closed_form_posterior(3).unwrap();
        let exact: Vec<f64> = mean.iter().copied().collect();
        let cfg = config(2, 1e-4);
        let init = ParticleEnsemble::standard_normal(200, 2, seed, 1).unwrap();
        let (sl, sl_trace) = run_svgd(init.clone().at_level(3), &h, 3, &cfg).unwrap();
        let (ml, ml_trace) = run_mlsvgd(init, &h, &LevelSchedule::uniform(3, 1e-4).unwrap(), &cfg).unwrap();
        assert!(sl_trace.tolerance_met() && ml_trace.tolerance_met());
        assert!(relative_error(&sl.mean(), &exact).unwrap() <= 1e-2);
        assert!(relative_error(&ml.mean(), &exact).unwrap() <= 1e-2);
    }
}

/// 10-iteration moving averages of ḡ within each level phase, after the
/// phase's first 10 iterations.
fn moving_average_violations(trace: &RunTrace) -> usize {
    let mut violations = 0;
    for summary in &trace.levels {
        let g: Vec<f64> = trace
            .rows
            .iter()
            .filter(|r| r.level == summary.level)
            .map(|r| r.mean_gradient_norm)
            .collect();
        let avg: Vec<f64> = g.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
        violations += avg
            .iter()
            .skip(10)
            .zip(avg.iter().skip(11))
            .filter(|(a, b)| b > a)
            .count();
    }
    violations
}

#[test]
fn multilevel_is_cheaper_on_elliptic_benchmark() {
    let seed = 1;
    let p = make_benchmark_elliptic(seed, 3).unwrap();
    let cfg = config(25, 1e-2);
    let init = ParticleEnsemble::standard_normal(200, 25, seed, 1).unwrap();
    let (_, ml) = run_mlsvgd(init.clone(), &p, &LevelSchedule::uniform(3, 1e-2).unwrap(), &cfg).unwrap();
    let (_, sl) = run_svgd(init.at_level(3), &p, 3, &cfg).unwrap();
    assert!(ml.tolerance_met() && sl.tolerance_met());
    assert!(
        ml.final_cost() <= 0.5 * sl.final_cost(),
        "{} vs {}",
        ml.final_cost(),
        sl.final_cost()
    );
    assert_eq!(moving_average_violations(&ml), 0);
    assert_eq!(moving_average_violations(&sl), 0);
}

#[test]
fn final_phase_uses_the_single_level_operator() {
    let h = GaussianLinearBuilder::new(3, 4, 3, 5).build().unwrap();
    let cfg = config(3, 1e-2);
    let init = ParticleEnsemble::standard_normal(50, 3, 5, 1).unwrap();
    let two = LevelSchedule::new(vec![1, 2], vec![1e-2, 1e-2], 1e-2).unwrap();
    let (warm, _) = run_mlsvgd(init, &h, &two, &cfg).unwrap();
    let warm = warm.at_level(3);
    let mut one = cfg;
    one.max_iterations = 1;
    one.tolerance = 1e-300;
    let (via_run, _) = run_svgd(warm.clone(), &h, 3, &one).unwrap();
    let via_step = svgd_step(&warm, &h, 3, &cfg).unwrap();
    assert_eq!(via_run.particles(), via_step.particles());
}

#[test]
fn cost_totals_equal_sum_of_increments() {
    let h = GaussianLinearBuilder::new(2, 3, 3, 2).build().unwrap();
    let cfg = config(2, 1e-2);
    let init = ParticleEnsemble::standard_normal(40, 2, 2, 1).unwrap();
    let (ens, trace) = run_mlsvgd(init, &h, &LevelSchedule::uniform(3, 1e-2).unwrap(), &cfg).unwrap();
    let by_level: f64 = trace.levels.iter().map(|l| l.cost).sum();
    assert_eq!(by_level, trace.final_cost());
    assert_eq!(ens.accumulated_cost(), trace.final_cost());
    let steps: usize = trace.levels.iter().map(|l| l.iterations).sum();
    assert_eq!(steps, ens.iteration());
}
