use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lsbec::{
    count_eigenvalues_below, eigenvalues, sample_realization, solve_mu, LevelRequest, ThermoOptions, ThermoSpectrum,
};

fn counting(c: &mut Criterion) {
    let mut g = c.benchmark_group("count");
    for length in [1e3, 1e4, 1e5] {
        let config = sample_realization(length, 1.0, 1, 0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(length), &config, |b, cfg| {
            b.iter(|| count_eigenvalues_below(cfg, 5.0, black_box(0.5)))
        });
    }
    g.finish();
}

fn extraction(c: &mut Criterion) {
    let mut g = c.benchmark_group("lowest_levels");
    g.sample_size(10);
    for levels in [10, 100] {
        let config = sample_realization(1000.0, 1.0, 2, 0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(levels), &levels, |b, &j| {
            b.iter(|| eigenvalues(&config, 5.0, LevelRequest::Lowest(j)).unwrap())
        });
    }
    g.finish();
}

fn thermodynamics(c: &mut Criterion) {
    let mut g = c.benchmark_group("thermo");
    g.sample_size(10);
    for particles in [1_000u64, 10_000] {
        let config = sample_realization(particles as f64, 1.0, 3, 0).unwrap();
        g.bench_with_input(BenchmarkId::new("measure_and_solve", particles), &config, |b, cfg| {
            b.iter(|| {
                let ts = ThermoSpectrum::measure(cfg, 5.0, 1.0, &ThermoOptions::default()).unwrap();
                solve_mu(&ts, 1.0, particles).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, counting, extraction, thermodynamics);
criterion_main!(benches);
