//! Empirical decay rates of model error and posterior discrepancy across levels.

use mlsvgd::diagnostics::{fit_decay_rate, gaussian_hellinger, gaussian_kl};
use mlsvgd::hierarchy::{make_benchmark_elliptic, GaussianLinearBuilder};

#[test]
fn operator_error_decays_at_planted_rate() {
    for (seed, alpha) in [(0u64, 0.5), (1, 1.0), (2, 1.5)] {
        let h = GaussianLinearBuilder::new(3, 5, 8, seed)
            .decay(0.7, 2.0, alpha)
            .build()
            .unwrap();
        let levels: Vec<usize> = (1..=8).collect();
        let errs: Vec<f64> = levels.iter().map(|&l| h.operator_error(l).unwrap()).collect();
        let fit = fit_decay_rate(&levels, &errs, 2.0).unwrap();
        assert!((fit.rate - alpha).abs() <= 0.1 * alpha, "rate {} vs {alpha}", fit.rate);
        assert!(fit.r_squared > 0.999);
    }
}

/// The posterior mean shift is linear in the operator perturbation, so the
/// KL divergence decays at twice the operator rate. Planting `α/2` on the
/// operator gives KL rate `α`.
#[test]
fn posterior_kl_decays_at_planted_rate() {
    let finest = 12;
    for (seed, alpha) in [(3u64, 1.0), (4, 2.0), (5, 1.5)] {
        let h = GaussianLinearBuilder::new(3, 5, finest, seed)
            .decay(1.0, 2.0, alpha / 2.0)
            .build()
            .unwrap();
        let (mf, sf) = h.closed_form_posterior(finest).unwrap();
        let levels: Vec<usize> = (1..=finest / 2).collect();
        let kl: Vec<f64> = levels
            .iter()
            .map(|&l| {
                let (m, s) = h.closed_form_posterior(l).unwrap();
                gaussian_kl(&m, &s, &mf, &sf).unwrap()
            })
            .collect();
        let fit = fit_decay_rate(&levels, &kl, 2.0).unwrap();
        assert!((fit.rate - alpha).abs() <= 0.2 * alpha, "rate {} vs {alpha}", fit.rate);
        for (&l, &k) in levels.iter().zip(&kl) {
            let (m, s) = h.closed_form_posterior(l).unwrap();
            let dh = gaussian_hellinger(&m, &s, &mf, &sf).unwrap();
            assert!(2.0 * dh * dh <= k + 1e-12);
        }
    }
}

#[test]
fn elliptic_forward_map_converges_at_second_order() {
    let p = make_benchmark_elliptic(2, 3).unwrap();
    let theta = p.truth.clone().unwrap();
    let levels: Vec<usize> = (1..=5).collect();
    let errs: Vec<f64> = levels
        .iter()
        .map(|&l| {
            let coarse = p.forward_cells(p.coarse_cells << (l - 1), &theta).unwrap();
            let fine = p.forward_cells(p.coarse_cells << (l + 1), &theta).unwrap();
            coarse
                .iter()
                .zip(&fine)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let fit = fit_decay_rate(&levels, &errs, 2.0).unwrap();
    assert!((fit.rate - 2.0).abs() <= 0.3, "rate {} from {errs:?}", fit.rate);
}
