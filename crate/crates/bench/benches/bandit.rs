use std::hint::black_box;

use cbli_core::bandit::{encode_pairwise, select_sleeping};
use cbli_core::{ContextVector, FeatureVector, ItemFeatures, LinUcbModel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

fn warmed(d: usize, rng: &mut ChaCha8Rng) -> LinUcbModel {
    let mut m = LinUcbModel::new(d, 10.0, 1.0).unwrap();
    for _ in 0..200 {
        let x = FeatureVector::new(random_vec(rng, d));
        m.update(&x, rng.random()).unwrap();
    }
    m
}

fn update(c: &mut Criterion) {
    let mut group = c.benchmark_group("linucb_update");
    for d in [32, 152, 448] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = warmed(d, &mut rng);
        let xs: Vec<FeatureVector> = (0..64).map(|_| FeatureVector::new(random_vec(&mut rng, d))).collect();
        let mut i = 0;
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| {
                i = (i + 1) % xs.len();
                model.update(black_box(&xs[i]), 0.5).unwrap();
            })
        });
    }
    group.finish();
}

fn select(c: &mut Criterion) {
    let mut group = c.benchmark_group("linucb_select_k4");
    for d in [32, 152] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = warmed(d, &mut rng);
        let candidates: Vec<FeatureVector> = (0..4).map(|_| FeatureVector::new(random_vec(&mut rng, d))).collect();
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| model.select(black_box(&candidates)).unwrap())
        });
    }
    group.finish();
}

fn sleeping(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (ctx_dim, p) = (64, 7);
    let model = warmed(ctx_dim * p, &mut rng);
    let ctx = ContextVector::new(random_vec(&mut rng, ctx_dim));
    let a = ItemFeatures::new(random_vec(&mut rng, p));
    let b2 = ItemFeatures::new(random_vec(&mut rng, p));
    c.bench_function("pairwise_encode_448", |b| {
        b.iter(|| encode_pairwise(black_box(&ctx), &a, &b2).unwrap())
    });
    c.bench_function("select_sleeping_448", |b| {
        b.iter(|| select_sleeping(&model, black_box(&ctx), (&a, &b2)).unwrap())
    });
}

criterion_group!(benches, update, select, sleeping);
criterion_main!(benches);
