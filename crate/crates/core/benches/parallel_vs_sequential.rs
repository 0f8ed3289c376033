use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rfol::{assemble, datagen, features, linalg, parallel, train_operator, Distribution, RfConfig, TrainConfig};
use std::hint::black_box;

fn modes() -> Vec<(&'static str, bool)> {
    if cfg!(feature = "parallel") {
        vec![("sequential", false), ("parallel", true)]
    } else {
        vec![("sequential", false)]
    }
}

fn bench_assembly_and_gram(c: &mut Criterion) {
    let ds = datagen::gen_advection1(400, 40, 1).unwrap();
    let cfg = RfConfig {
        distribution: Distribution::Cauchy,
        gamma: 1e-5,
        n_features: 4000,
        seed: 2,
    };
    let ens = features::sample(&cfg, 40).unwrap();
    let a = assemble(&ens, ds.inputs.as_slice(), 40).unwrap();

    let mut g = c.benchmark_group("assemble_400x4000");
    g.sample_size(10);
    for (name, on) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            parallel::set_enabled(on);
            b.iter(|| assemble(&ens, black_box(ds.inputs.as_slice()), 40).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("gram_400x4000");
    g.sample_size(10);
    for (name, on) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            parallel::set_enabled(on);
            b.iter(|| linalg::gram(black_box(&a)))
        });
    }
    g.finish();
    parallel::set_enabled(true);
}

fn bench_training(c: &mut Criterion) {
    let ds = datagen::gen_advection1(300, 40, 1).unwrap();
    let cfg = TrainConfig::new(Distribution::Cauchy, 1e-5, 2000, 3);
    let mut g = c.benchmark_group("train_advection1_300x2000");
    g.sample_size(10);
    for (name, on) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            parallel::set_enabled(on);
            b.iter(|| train_operator(black_box(&ds), &cfg).unwrap())
        });
    }
    g.finish();
    parallel::set_enabled(true);
}

criterion_group!(benches, bench_assembly_and_gram, bench_training);
criterion_main!(benches);
