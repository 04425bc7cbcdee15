use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diot_bench::config;
use diot_core::entropy::{smooth_min_entropy, JointDistribution};
use diot_core::hashing::sample_hash;
use diot_core::protocols::{run_protocol1, run_protocol4, Protocol1Options, Protocol4Options};
use diot_core::qsim::{fig1_branch, make_bell, Basis, BellLabel, StateVector};
use diot_core::rng::SeedTree;
use diot_core::BitString;

fn simulator(c: &mut Criterion) {
    let bell = make_bell(BellLabel::new(1, 1).unwrap());
    c.bench_function("bell_outcome_distribution", |b| b.iter(|| bell.outcome_distribution(&[Basis::Hadamard, Basis::Hadamard]).unwrap()));
    let input = StateVector::plus().tensor(&StateVector::minus()).unwrap();
    c.bench_function("fig1_branch", |b| b.iter(|| fig1_branch(&input, 1, 0).unwrap()));
}

fn protocols(c: &mut Criterion) {
    let mut group = c.benchmark_group("protocol_run");
    group.sample_size(20);
    for n in [64, 256] {
        let cfg = config(n, 4);
        group.bench_with_input(BenchmarkId::new("bell_pair", n), &cfg, |b, cfg| {
            b.iter(|| run_protocol1(cfg, &Protocol1Options::default(), SeedTree::new(1)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("device_independent", n), &cfg, |b, cfg| {
            b.iter(|| run_protocol4(cfg, &Protocol4Options::default(), SeedTree::new(1)).unwrap())
        });
    }
    group.finish();
}

fn classical(c: &mut Criterion) {
    let mut rng = SeedTree::new(2).rng();
    let f = sample_hash(256, 16, &mut rng).unwrap();
    let x = BitString::from_bits((0..256).map(|i| i % 3 == 0).collect());
    c.bench_function("hash_256_to_16", |b| b.iter(|| f.apply(&x).unwrap()));
    let weights: Vec<f64> = (0..64).map(|i| 1.0 + (i % 7) as f64).collect();
    let d = JointDistribution::from_weights(16, 4, weights).unwrap();
    c.bench_function("smooth_min_entropy_16x4", |b| b.iter(|| smooth_min_entropy(&d, 0.05).unwrap()));
}

criterion_group!(benches, simulator, protocols, classical);
criterion_main!(benches);
