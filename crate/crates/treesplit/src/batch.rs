//! Seeded batches of independent runs and machine-independent cost probes.
//!
//! Batch item i always draws from stream i of the batch seed, so a batch
//! is one deterministic object: the collected results are identical, in
//! the same order, whether the `parallel` feature fans the work across a
//! thread pool or the fallback runs it on one.

use std::time::Instant;

use serde::Serialize;

use crate::region::PlanarRegion;
use crate::rng::WalkRng;
use crate::sampler::{sample_balanced, sample_ust, SamplerConfig};
use crate::walks::dual_wilson_tree;

/// Run `f` once per stream `0..n` of `seed`, collecting results in
/// stream order.
pub fn run_batch<T: Send>(
    n: u64,
    seed: u64,
    f: impl Fn(u64, &mut WalkRng) -> T + Sync,
) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| f(i, &mut WalkRng::new(seed, i)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(|i| f(i, &mut WalkRng::new(seed, i))).collect()
    }
}

/// Averaged cost of repeated sampler calls on one region. Walk steps are
/// the primary, machine-independent metric; wall time rides along and is
/// skewed by pool contention when measured in parallel.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CostPoint {
    pub cells: u64,
    pub vertices: u64,
    pub reps: u64,
    pub mean_walk_steps: f64,
    pub mean_wall_ns: f64,
    pub bot_rate: f64,
}

fn summarize(region: &PlanarRegion, rows: &[(u64, u64, bool)]) -> CostPoint {
    let reps = rows.len() as u64;
    let steps: u64 = rows.iter().map(|r| r.0).sum();
    let wall: u64 = rows.iter().map(|r| r.1).sum();
    let bots = rows.iter().filter(|r| r.2).count();
    CostPoint {
        cells: region.cell_count() as u64,
        vertices: region.vertex_count() as u64,
        reps,
        mean_walk_steps: steps as f64 / reps as f64,
        mean_wall_ns: wall as f64 / reps as f64,
        bot_rate: bots as f64 / reps as f64,
    }
}

/// Mean cost of the balanced 2-split sampler on `region`.
pub fn balanced_cost(
    region: &PlanarRegion,
    cfg: &SamplerConfig,
    reps: u64,
    seed: u64,
) -> CostPoint {
    let rows = run_batch(reps, seed, |_, rng| {
        let t = Instant::now();
        let out = sample_balanced(region, cfg, rng).expect("probe region must be simply connected");
        (out.stats.walk_steps, t.elapsed().as_nanos() as u64, out.partition.is_none())
    });
    summarize(region, &rows)
}

/// Mean cost of the staged uniform-spanning-tree sampler on `region`.
pub fn ust_cost(region: &PlanarRegion, cfg: &SamplerConfig, reps: u64, seed: u64) -> CostPoint {
    let rows = run_batch(reps, seed, |_, rng| {
        let t = Instant::now();
        let (_, stats) = sample_ust(region, cfg, rng).expect("probe region must be simply connected");
        (stats.walk_steps, t.elapsed().as_nanos() as u64, false)
    });
    summarize(region, &rows)
}

/// Mean cost of the one-shot full-tree baseline: plain Wilson on the
/// contracted dual.
pub fn dual_wilson_cost(region: &PlanarRegion, reps: u64, seed: u64) -> CostPoint {
    let rows = run_batch(reps, seed, |_, rng| {
        let t = Instant::now();
        let (_, steps) = dual_wilson_tree(region, rng);
        (steps, t.elapsed().as_nanos() as u64, false)
    });
    summarize(region, &rows)
}
