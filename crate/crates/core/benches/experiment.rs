use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use stiefel_mvn::exec::default_workers;
use stiefel_mvn::sampling::sample_alternative;
use stiefel_mvn::*;

fn config(model: AlternativeModel, workers: usize) -> SimConfig {
    SimConfig {
        model,
        n_obs: 20,
        dim: 3,
        m: 3,
        alpha: 0.05,
        method: UnivariateMethod::ShapiroWilk,
        replications: 2_000,
        seed: RngSeedSpec::new(1),
        workers,
    }
}

fn run_experiment_paths(c: &mut Criterion) {
    let parallel = default_workers().max(2);
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    group.throughput(Throughput::Elements(2_000));
    for model in [AlternativeModel::NullMvn, AlternativeModel::student_t()] {
        for (path, workers) in [("sequential", 1), ("parallel", parallel)] {
            let cfg = config(model, workers);
            group.bench_with_input(BenchmarkId::new(path, model.label()), &cfg, |b, cfg| {
                b.iter(|| run_experiment(black_box(cfg)).unwrap().rejections)
            });
        }
    }
    group.finish();
}

fn repeat_stability_paths(c: &mut Criterion) {
    let x = sample_alternative(&AlternativeModel::NullMvn, 150, 4, &mut RngSeedSpec::new(2).rng()).unwrap();
    let cfg = TestConfig::default();
    let mut group = c.benchmark_group("repeat_stability");
    group.sample_size(10);
    for (path, workers) in [("sequential", 1), ("parallel", default_workers().max(2))] {
        group.bench_function(path, |b| {
            b.iter(|| harness::repeat_stability_with_workers(black_box(&x), &cfg, 500, workers).unwrap())
        });
    }
    group.finish();
}

fn single_test(c: &mut Criterion) {
    let mut group = c.benchmark_group("mvn_test");
    for (n_obs, dim) in [(20, 3), (150, 4), (1000, 5)] {
        let x = sample_alternative(&AlternativeModel::NullMvn, n_obs, dim, &mut RngSeedSpec::new(3).rng()).unwrap();
        let cfg = TestConfig {
            method: UnivariateMethod::AndersonDarling,
            m: 5,
            ..TestConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("N{n_obs}_p{dim}")), &x, |b, x| {
            b.iter(|| mvn_test(black_box(x), &cfg).unwrap().reject)
        });
    }
    group.finish();
}

criterion_group!(benches, run_experiment_paths, repeat_stability_paths, single_test);
criterion_main!(benches);
