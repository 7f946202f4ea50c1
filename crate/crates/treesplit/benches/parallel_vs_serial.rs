//! Two comparisons: seeded batches through the thread pool against the
//! same work on one thread, and the staged tree sampler against the
//! one-shot dual-Wilson baseline. Walk-step scaling lives in the CLI
//! bench command; this suite watches wall time.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use treesplit::walks::dual_wilson_tree;
use treesplit::{
    balanced_cost, grid_block, sample_balanced, sample_ust, PlanarRegion, SamplerConfig, WalkRng,
};

const BATCH: u64 = 64;
const SEED: u64 = 97;

fn single_thread_batch(region: &PlanarRegion, cfg: &SamplerConfig) -> u64 {
    let mut steps = 0;
    for i in 0..BATCH {
        let mut rng = WalkRng::new(SEED, i);
        steps += sample_balanced(region, cfg, &mut rng).unwrap().stats.walk_steps;
    }
    steps
}

fn balanced_batches(c: &mut Criterion) {
    let region = grid_block(32, 32);
    let cfg = SamplerConfig::default();
    let mut g = c.benchmark_group("balanced_batch_32x32");
    g.sample_size(10);
    g.bench_function("pooled", |b| {
        b.iter(|| black_box(balanced_cost(&region, &cfg, BATCH, SEED)))
    });
    g.bench_function("single_thread", |b| {
        b.iter(|| black_box(single_thread_batch(&region, &cfg)))
    });
    g.finish();
}

fn tree_samplers(c: &mut Criterion) {
    let region = grid_block(64, 64);
    let cfg = SamplerConfig::default();
    let mut g = c.benchmark_group("tree_sampler_64x64");
    g.sample_size(10);
    g.bench_function("staged_sessions", |b| {
        let mut rng = WalkRng::new(SEED, 1);
        b.iter(|| black_box(sample_ust(&region, &cfg, &mut rng).unwrap().1.walk_steps))
    });
    g.bench_function("dual_wilson_full", |b| {
        let mut rng = WalkRng::new(SEED, 2);
        b.iter(|| black_box(dual_wilson_tree(&region, &mut rng).1))
    });
    g.finish();
}

criterion_group!(benches, balanced_batches, tree_samplers);
criterion_main!(benches);
