use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use oft_bench::textured_fixture;
use oft_core::losses::random_problem;
use oft_core::refine::{oft_refine, ProximalPrior, ProximalWeights, RefineConfig};
use oft_core::{total_loss, LossConfig};

fn losses(c: &mut Criterion) {
    let (state, snippet) = textured_fixture(0);
    let cfg = LossConfig::default();
    c.bench_function("total_loss 64x208", |b| b.iter(|| total_loss(black_box(&state), &snippet, &cfg).unwrap()));

    let (small, small_snippet) = random_problem(16, 16, 0).unwrap();
    c.bench_function("total_loss 16x16", |b| b.iter(|| total_loss(black_box(&small), &small_snippet, &cfg).unwrap()));
}

fn refinement(c: &mut Criterion) {
    let (state, snippet) = textured_fixture(1);
    let prior = ProximalPrior {
        anchor: state,
        weights: ProximalWeights::default(),
    };
    let cfg = RefineConfig {
        iterations: 5,
        ..RefineConfig::default()
    };
    let mut g = c.benchmark_group("refine");
    g.sample_size(10);
    g.bench_function("5 iterations 64x208", |b| b.iter(|| oft_refine(&snippet, black_box(&prior), &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, losses, refinement);
criterion_main!(benches);
