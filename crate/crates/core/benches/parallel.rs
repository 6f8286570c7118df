use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mlsvgd::diagnostics::{mmd_squared, SampleSet};
use mlsvgd::hierarchy::make_benchmark_elliptic;
use mlsvgd::par::with_threads;
use mlsvgd::svgd::{svgd_step, ParticleEnsemble, SvgdConfig};
use mlsvgd::KernelSpec;

/// Thread counts compared: 1 is the sequential baseline, 0 the default pool.
const THREADS: [usize; 2] = [1, 0];

fn svgd_step_elliptic(c: &mut Criterion) {
    let p = make_benchmark_elliptic(1, 3).unwrap();
    let cfg = SvgdConfig::new(0.05, KernelSpec::new(0.1, 25).unwrap(), 1e-2, 1).unwrap();
    let ens = ParticleEnsemble::standard_normal(200, 25, 1, 3).unwrap();
    let mut group = c.benchmark_group("svgd_step_elliptic_n200");
    group.sample_size(20);
    for threads in THREADS {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| with_threads(t, || svgd_step(&ens, &p, 3, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn mmd_500(c: &mut Criterion) {
    let a = ParticleEnsemble::standard_normal(500, 2, 1, 1).unwrap();
    let b = ParticleEnsemble::standard_normal(500, 2, 2, 1).unwrap();
    let sa = SampleSet::new(a.particles().clone(), "a").unwrap();
    let sb = SampleSet::new(b.particles().clone(), "b").unwrap();
    let k = KernelSpec::new(0.5, 2).unwrap();
    let mut group = c.benchmark_group("mmd_n500");
    for threads in THREADS {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |bch, &t| {
            bch.iter(|| with_threads(t, || mmd_squared(&sa, &sb, &k).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, svgd_step_elliptic, mmd_500);
criterion_main!(benches);
