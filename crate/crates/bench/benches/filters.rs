use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use robustkf_bench::update_fixture;
use robustkf_core::{
    kf_update, mckf_update, run_monte_carlo, sim, ExperimentConfig, FilterSpec, KernelConfig,
    ModelChoice, NoiseCase,
};

fn updates(c: &mut Criterion) {
    let mut group = c.benchmark_group("update");
    for example in [1u8, 2] {
        let fx = update_fixture(example);
        group.bench_with_input(BenchmarkId::new("kf", example), &fx, |b, fx| {
            b.iter(|| kf_update(&fx.model, black_box(&fx.prior), black_box(&fx.y)).unwrap())
        });
        for sigma in [0.5, 2.0, 10.0] {
            let kernel = KernelConfig::new(sigma, 1e-6).unwrap();
            group.bench_with_input(
                BenchmarkId::new(format!("mckf_sigma_{sigma}"), example),
                &fx,
                |b, fx| {
                    b.iter(|| {
                        mckf_update(&fx.model, black_box(&fx.prior), black_box(&fx.y), &kernel)
                            .unwrap()
                    })
                },
            );
        }
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut config = ExperimentConfig::new(
        ModelChoice::Example1 {
            theta: sim::DEFAULT_THETA,
        },
        NoiseCase::ImpulsiveMeasurement,
        7,
    );
    config.runs = 4;
    config.steps = 250;
    config.keep_errors = false;
    config.filters = vec![
        FilterSpec::Kalman,
        FilterSpec::Mckf(KernelConfig::new(2.0, 1e-6).unwrap()),
    ];
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    group.bench_function("example1_impulsive_4x250", |b| {
        b.iter(|| run_monte_carlo(black_box(&config)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, updates, monte_carlo);
criterion_main!(benches);
