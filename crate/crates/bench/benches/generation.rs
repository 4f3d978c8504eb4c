use std::hint::black_box;

use cbli_core::env::rank_order_check;
use cbli_core::generate::{generate_dense, generate_sparse, sample_users, GenerationOptions};
use cbli_core::scenario::{DonationScenario, VaccineScenario};
use criterion::{criterion_group, criterion_main, Criterion};

fn dense(c: &mut Criterion) {
    let scenario = DonationScenario::new(0);
    let users = sample_users(&scenario.spec, 100, 1).unwrap();
    let oracle = scenario.oracle(&users, 0.0).unwrap();
    c.bench_function("dense_generation_100_users", |b| {
        b.iter(|| generate_dense(black_box(&users), &scenario.arms, &oracle, GenerationOptions::default()).unwrap())
    });
}

fn sparse(c: &mut Criterion) {
    let scenario = VaccineScenario::new(0);
    let users = sample_users(&scenario.user_spec(), 100, 1).unwrap();
    let oracle = scenario.oracle(&users, 0.0).unwrap();
    c.bench_function("sparse_generation_100_users", |b| {
        b.iter(|| generate_sparse(black_box(&users), &scenario.catalog, &oracle, GenerationOptions::default()).unwrap())
    });
}

fn rank(c: &mut Criterion) {
    c.bench_function("rank_order_check_1e4", |b| {
        b.iter(|| rank_order_check(black_box(&[0.9, 0.5, 0.1]), 10_000, 7).unwrap())
    });
}

criterion_group!(benches, dense, sparse, rank);
criterion_main!(benches);
