//! Balanced 2-partition samplers over the edge-deletion process.
//!
//! [`sample_balanced`] draws a tree-weighted partition into two sides of
//! exactly equal weight — or bot, when the implicitly drawn spanning tree
//! has no balance edge — without materializing the whole tree. Work is
//! organized into *sessions*: walk stages aimed at the current center
//! region of the region tree, run until everything refined from that
//! center weighs at most 3/4 of it, at which point the center has moved
//! and the loop repeats. [`sample_q_balanced`] relaxes exact balance to a
//! slack of `q` and also reports how many near-balance edges the hidden
//! tree carries. [`sample_ust`] refines every region to atoms, upon which
//! the surviving bridges are themselves a uniform spanning tree.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::policy::{PolicyEngine, PolicyParams};
use crate::region::PlanarRegion;
use crate::region_tree::{contiguous_door_window_exists, Center, RegionTree};
use crate::rng::WalkRng;
use crate::walks::DualForestState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SampleError {
    /// Walk staging runs on the wired dual tree, which needs a hole-free
    /// region.
    #[error("region is not simply connected")]
    NotSimplyConnected,
    /// Slack of more than half the total weight makes every tree edge a
    /// valid split; such requests are refused as meaningless.
    #[error("q = {q} is too large for total weight {total}")]
    QTooLarge { q: u64, total: u64 },
}

/// A 2-partition of the region's vertices realized by deleting one edge
/// of a (possibly only partially materialized) spanning tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Partition2 {
    /// Sorted vertex ids of the side containing vertex 0.
    pub side_a: Vec<u32>,
    /// Sorted vertex ids of the complement.
    pub side_b: Vec<u32>,
    pub weight_a: u64,
    pub weight_b: u64,
    /// Primal edge whose removal from the implicit tree realized the
    /// split.
    pub balance_edge: Option<u32>,
}

impl Partition2 {
    fn from_sides(
        mut side_a: Vec<u32>,
        mut side_b: Vec<u32>,
        mut weight_a: u64,
        mut weight_b: u64,
        balance_edge: Option<u32>,
    ) -> Self {
        if side_b.first() == Some(&0) {
            std::mem::swap(&mut side_a, &mut side_b);
            std::mem::swap(&mut weight_a, &mut weight_b);
        }
        debug_assert_eq!(side_a.first(), Some(&0));
        Partition2 { side_a, side_b, weight_a, weight_b, balance_edge }
    }

    /// Canonical identity of the partition: the sorted side holding
    /// vertex 0.
    pub fn key(&self) -> &[u32] {
        &self.side_a
    }

    /// Number of region edges crossing between the two sides.
    pub fn cut_size(&self, region: &PlanarRegion) -> usize {
        crate::oracle::cut_size(region, &self.side_a)
    }
}

/// Work counters for one sampler invocation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleStats {
    /// Walk stages run across all sessions.
    pub stages: u64,
    /// Dual walk steps consumed, free and loop-erased phases together.
    pub walk_steps: u64,
    /// Sessions chained in exact mode; rounds in q-mode; work-stack depth
    /// for tree sampling.
    pub recursion_depth: u32,
    /// Whether the door-window prune produced the bot verdict.
    pub precheck_rejected: bool,
    /// Free-phase walk restarts after overstaying the roam cap.
    pub free_restarts: u64,
}

/// Result of one partition draw.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleOutcome {
    /// The sampled partition, or `None` when the implicit tree admits no
    /// (near-)balance edge.
    pub partition: Option<Partition2>,
    /// Number of q-balance edges of the implicit tree; 0 or 1 in exact
    /// mode.
    pub q_count: u64,
    pub stats: SampleStats,
}

/// Knobs shared by all samplers.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub policy: PolicyParams,
    /// Run the door-window prune before refining a vertex center (exact
    /// balance only). Sound: it only rejects centers that no completion
    /// of the current forest can split evenly.
    pub use_precheck: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { policy: PolicyParams::calibrated(), use_precheck: true }
    }
}

struct SessionExit {
    /// Every region id carved off while the session ran. The session
    /// target is not among them: a splitting block keeps its id on the
    /// dominant piece, so the caller must re-examine the target itself.
    new_ids: Vec<u32>,
    /// True when the session ended by reaching the 3/4 bar, as opposed to
    /// stalling on a single heavy atom (possible only under vertex
    /// weights).
    contracted: bool,
}

/// One center session: stage walks aimed at `center`'s block until every
/// region refined from it weighs at most 3/4 of the original — the center
/// id included, since it lives on as the dominant piece of its own
/// splits.
fn run_session(
    forest: &mut DualForestState,
    rt: &mut RegionTree,
    engine: &mut PolicyEngine,
    center: u32,
    rng: &mut WalkRng,
    stats: &mut SampleStats,
) -> SessionExit {
    debug_assert!(rt.is_alive(center) && !rt.is_atomic(center));
    let mut members = rt.region_verts(center).to_vec();
    members.sort_unstable();
    let w_center = rt.region_weight(center);

    // Max-heap over the live refinement of the center. A splitting block
    // keeps its id with a smaller weight, so an entry whose weight no
    // longer matches is stale; re-keying it on sight restores heap order
    // without indexed updates (weights only ever shrink).
    let mut heap: BinaryHeap<(u64, u32)> = BinaryHeap::new();
    heap.push((w_center, center));
    let mut new_ids = Vec::new();
    let contracted = loop {
        let (w_top, top) = loop {
            let &(w, r) = heap.peek().expect("refinement of a live center cannot vanish");
            if !rt.is_alive(r) {
                heap.pop();
                continue;
            }
            let cur = rt.region_weight(r);
            if cur == w {
                break (w, r);
            }
            heap.pop();
            heap.push((cur, r));
        };
        if 4 * w_top <= 3 * w_center {
            break true;
        }
        if rt.is_atomic(top) {
            // A single vertex outweighs the 3/4 bar; there is no edge
            // inside it left to delete.
            break false;
        }
        let d = engine.directive(forest, center, &members, rng);
        let report = forest.run_stage(d.s, d.t, rng);
        stats.stages += 1;
        stats.walk_steps += report.steps;
        stats.free_restarts += u64::from(report.free_restarts);
        for id in rt.apply_deletions(&report.deleted_edges, &report.new_bridges) {
            if rt.is_alive(id) && members.binary_search(&rt.region_verts(id)[0]).is_ok() {
                heap.push((rt.region_weight(id), id));
            }
            new_ids.push(id);
        }
    };
    SessionExit { new_ids, contracted }
}

/// Door-window prune: a center can be split evenly by some completion
/// only if a contiguous run of its doors (in cyclic order around the
/// block boundary) together with part of the block can carry exactly
/// half the total weight. Conservative — blocks whose doors do not all
/// sit on the outer face are never pruned.
fn precheck_allows(rt: &RegionTree, r: u32) -> bool {
    let Some(order) = rt.doors_cyclic(r) else {
        return true;
    };
    let hanging: HashMap<u32, u64> = rt.hanging_weights(r).into_iter().collect();
    let doors: Vec<u64> = order.iter().map(|b| hanging[b]).collect();
    contiguous_door_window_exists(&doors, rt.region_weight(r), rt.total_weight(), 0)
}

fn bridge_partition(region: &PlanarRegion, rt: &RegionTree, b: u32) -> Partition2 {
    let (side_a, side_b) = rt.sides_of_bridge(b);
    let weight_a: u64 = side_a.iter().map(|&v| region.weight(v)).sum();
    let weight_b = region.total_weight() - weight_a;
    let edge = rt.bridge(b).edge;
    Partition2::from_sides(side_a, side_b, weight_a, weight_b, Some(edge))
}

/// Draw a tree-weighted exactly-balanced 2-partition of the region, or
/// `None` when the implicitly sampled spanning tree has no balance edge
/// (always the case for odd total weight). The outcome is distributed as:
/// draw a uniform spanning tree, delete its unique balance edge if one
/// exists.
pub fn sample_balanced(
    region: &PlanarRegion,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
) -> Result<SampleOutcome, SampleError> {
    balanced_impl(region, cfg, rng).map(|(outcome, _)| outcome)
}

/// Like [`sample_balanced`], but also completes the deletion process into
/// a full spanning tree after the outcome is decided. The outcome is a
/// deterministic function of the final tree, so the pair lets tests
/// replay the decision against the tree directly.
pub fn sample_balanced_traced(
    region: &PlanarRegion,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
) -> Result<(SampleOutcome, Vec<u32>), SampleError> {
    let (outcome, mut forest) = balanced_impl(region, cfg, rng)?;
    let tree = forest.complete_into_tree(rng);
    Ok((outcome, tree))
}

fn balanced_impl<'a>(
    region: &'a PlanarRegion,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
) -> Result<(SampleOutcome, DualForestState<'a>), SampleError> {
    if !region.is_simply_connected() {
        return Err(SampleError::NotSimplyConnected);
    }
    let mut forest = DualForestState::new(region);
    let mut rt = RegionTree::new(region);
    let mut engine = PolicyEngine::new(cfg.policy.clone());
    let mut stats = SampleStats::default();
    // Weight of the previous session's center, kept only when that
    // session ended by reaching the 3/4 bar.
    let mut contracted_from: Option<u64> = None;

    let outcome = loop {
        match rt.find_center() {
            Center::Edge(b) => {
                let p = bridge_partition(region, &rt, b);
                debug_assert_eq!(p.weight_a, p.weight_b);
                break SampleOutcome { partition: Some(p), q_count: 1, stats };
            }
            Center::Region(r) => {
                let w = rt.region_weight(r);
                if let Some(prev) = contracted_from {
                    assert!(4 * w <= 3 * prev, "center weight failed to contract: {w} after {prev}");
                }
                if rt.is_atomic(r) {
                    break SampleOutcome { partition: None, q_count: 0, stats };
                }
                if cfg.use_precheck && !precheck_allows(&rt, r) {
                    stats.precheck_rejected = true;
                    break SampleOutcome { partition: None, q_count: 0, stats };
                }
                stats.recursion_depth += 1;
                let exit = run_session(&mut forest, &mut rt, &mut engine, r, rng, &mut stats);
                contracted_from = exit.contracted.then_some(w);
            }
        }
    };
    Ok((outcome, forest))
}

/// Draw a uniform spanning tree of the region, returned as sorted primal
/// edge ids. Refines depth-first over an explicit work stack until every
/// region is atomic; the surviving bridges then form the tree.
pub fn sample_ust(
    region: &PlanarRegion,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
) -> Result<(Vec<u32>, SampleStats), SampleError> {
    if !region.is_simply_connected() {
        return Err(SampleError::NotSimplyConnected);
    }
    let mut forest = DualForestState::new(region);
    let mut rt = RegionTree::new(region);
    let mut engine = PolicyEngine::new(cfg.policy.clone());
    let mut stats = SampleStats::default();

    let mut stack: Vec<(u32, u32)> = rt.alive_regions().into_iter().map(|r| (r, 1)).collect();
    while let Some((r, depth)) = stack.pop() {
        if !rt.is_alive(r) || rt.is_atomic(r) {
            continue;
        }
        stats.recursion_depth = stats.recursion_depth.max(depth);
        let exit = run_session(&mut forest, &mut rt, &mut engine, r, rng, &mut stats);
        if !rt.is_atomic(r) {
            // The target survived its own splits; it shrank by 1/4 at
            // least, so this revisits O(log) times.
            stack.push((r, depth + 1));
        }
        for id in exit.new_ids {
            stack.push((id, depth + 1));
        }
    }
    debug_assert!(forest.is_complete());
    let tree = forest.surviving_edges();
    debug_assert_eq!(tree.len(), region.vertex_count() - 1);
    Ok((tree, stats))
}

/// Refine `r` and everything split from it until only atoms remain.
fn refine_fully(
    forest: &mut DualForestState,
    rt: &mut RegionTree,
    engine: &mut PolicyEngine,
    r: u32,
    rng: &mut WalkRng,
    stats: &mut SampleStats,
) {
    if !rt.is_alive(r) {
        return;
    }
    let mut members = rt.region_verts(r).to_vec();
    members.sort_unstable();
    let mut stack = vec![r];
    while let Some(x) = stack.pop() {
        if !rt.is_alive(x) || rt.is_atomic(x) {
            continue;
        }
        let exit = run_session(forest, rt, engine, x, rng, stats);
        if !rt.is_atomic(x) {
            stack.push(x);
        }
        for id in exit.new_ids {
            if rt.is_alive(id) && members.binary_search(&rt.region_verts(id)[0]).is_ok() {
                stack.push(id);
            }
        }
    }
}

/// Ends of the near-center path. For 6q < total the near-centers always
/// form a path in the region tree — a degree-3 arrangement would force
/// three hanging weights of at least total/2 − q each, overshooting the
/// total — so exactly two ends exist (or one degenerate singleton).
/// Beyond that regime the structure can be a star; callers fall back to
/// weight order.
fn path_ends(rt: &RegionTree, centers: &[u32], path_regime: bool) -> Vec<u32> {
    if centers.len() <= 1 {
        return centers.to_vec();
    }
    let mut ends = Vec::new();
    for &r in centers {
        let deg = rt
            .region_bridges(r)
            .iter()
            .filter(|&&b| {
                let (ra, rb) = rt.bridge(b).regions;
                let o = if ra == r { rb } else { ra };
                centers.binary_search(&o).is_ok()
            })
            .count();
        if path_regime {
            debug_assert!((1..=2).contains(&deg), "near-centers must form a path");
        }
        if deg <= 1 {
            ends.push(r);
        }
    }
    if path_regime {
        debug_assert_eq!(ends.len(), 2, "a path has two ends");
    }
    ends
}

/// Draw a tree-weighted q-balanced 2-partition: implicitly sample a
/// uniform spanning tree, count its edges whose deletion leaves both
/// sides within ±q of half the total weight, and return one of those
/// splits uniformly (`None` when the count is zero). `q_count` reports
/// the count, which for positive integer weights never exceeds 2q + 1.
pub fn sample_q_balanced(
    region: &PlanarRegion,
    q: u64,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
) -> Result<SampleOutcome, SampleError> {
    q_balanced_impl(region, q, cfg, rng).map(|(outcome, _)| outcome)
}

/// Trace-mode variant of [`sample_q_balanced`]; see
/// [`sample_balanced_traced`].
pub fn sample_q_balanced_traced(
    region: &PlanarRegion,
    q: u64,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
) -> Result<(SampleOutcome, Vec<u32>), SampleError> {
    let (outcome, mut forest) = q_balanced_impl(region, q, cfg, rng)?;
    let tree = forest.complete_into_tree(rng);
    Ok((outcome, tree))
}

fn q_balanced_impl<'a>(
    region: &'a PlanarRegion,
    q: u64,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
) -> Result<(SampleOutcome, DualForestState<'a>), SampleError> {
    if !region.is_simply_connected() {
        return Err(SampleError::NotSimplyConnected);
    }
    let total = region.total_weight();
    if 2 * q > total {
        return Err(SampleError::QTooLarge { q, total });
    }
    let mut forest = DualForestState::new(region);
    let mut rt = RegionTree::new(region);
    let mut engine = PolicyEngine::new(cfg.policy.clone());
    let mut stats = SampleStats::default();
    let path_regime = 6 * q < total;

    // Refine until no near-center region has an edge left inside it. New
    // bridges can then only appear inside regions too lopsided to yield a
    // near-balanced cut, and existing bridge side weights never change,
    // so the count below is already the count for the completed tree.
    loop {
        let centers = rt.near_center_regions(q);
        let live: Vec<u32> = centers.iter().copied().filter(|&r| !rt.is_atomic(r)).collect();
        if live.is_empty() {
            break;
        }
        stats.recursion_depth += 1;
        // Contract from an end of the center path; the centers strictly
        // between the two ends are light (at most 2q together) and are
        // refined outright.
        let ends = path_ends(&rt, &centers, path_regime);
        let v_star = live
            .iter()
            .copied()
            .filter(|r| ends.contains(r))
            .max_by_key(|&r| (rt.region_weight(r), Reverse(r)))
            .or_else(|| {
                live.iter().copied().max_by_key(|&r| (rt.region_weight(r), Reverse(r)))
            })
            .expect("a live center exists");
        for &r in &live {
            if r == v_star || ends.contains(&r) {
                continue;
            }
            refine_fully(&mut forest, &mut rt, &mut engine, r, rng, &mut stats);
        }
        if rt.is_alive(v_star) && !rt.is_atomic(v_star) {
            run_session(&mut forest, &mut rt, &mut engine, v_star, rng, &mut stats);
        }
    }

    let bridges = rt.near_balanced_bridges(q);
    let count = bridges.len() as u64;
    debug_assert!(count <= 2 * q + 1, "at most 2q+1 near-balance edges, got {count}");
    let partition = if count == 0 {
        None
    } else {
        let b = bridges[rng.random_range(0..bridges.len())];
        let p = bridge_partition(region, &rt, b);
        debug_assert!(2 * p.weight_a.max(p.weight_b) <= total + 2 * q);
        Some(p)
    };
    Ok((SampleOutcome { partition, q_count: count, stats }, forest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::split_distribution_by_trees;
    use crate::region::{build_grid_region, grid_block};
    use crate::stats::{chi_square_gof, chi_square_two_sample};
    use num_traits::ToPrimitive;
    use std::collections::BTreeMap;

    fn cfg() -> SamplerConfig {
        SamplerConfig::default()
    }

    /// Subtree weights of `tree` rooted at vertex 0, per tree edge: the
    /// weight hanging below the edge's child endpoint.
    fn tree_side_weights(region: &PlanarRegion, tree: &[u32]) -> Vec<(u32, u64, Vec<u32>)> {
        let n = region.vertex_count();
        let mut adj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for &e in tree {
            let (a, b) = region.edge_endpoints(e);
            adj[a as usize].push((b, e));
            adj[b as usize].push((a, e));
        }
        let mut parent = vec![(u32::MAX, u32::MAX); n]; // (vertex, edge)
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0u32];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(u, e) in &adj[v as usize] {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    parent[u as usize] = (v, e);
                    stack.push(u);
                }
            }
        }
        assert_eq!(order.len(), n, "tree must span");
        let mut down = vec![0u64; n];
        let mut below: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &v in order.iter().rev() {
            down[v as usize] += region.weight(v);
            below[v as usize].push(v);
            let (p, _) = parent[v as usize];
            if p != u32::MAX {
                down[p as usize] += down[v as usize];
                let moved = std::mem::take(&mut below[v as usize]);
                below[v as usize] = moved.clone();
                below[p as usize].extend_from_slice(&moved);
            }
        }
        (1..n)
            .map(|v| {
                let (_, e) = parent[v];
                let mut side = below[v].clone();
                side.sort_unstable();
                (e, down[v], side)
            })
            .collect()
    }

    #[test]
    fn path4_splits_at_middle_edge() {
        let region = grid_block(4, 1);
        let mut rng = WalkRng::new(11, 0);
        for _ in 0..10 {
            let out = sample_balanced(&region, &cfg(), &mut rng).unwrap();
            let p = out.partition.expect("path-4 always splits");
            assert_eq!(p.side_a, vec![0, 1]);
            assert_eq!(p.side_b, vec![2, 3]);
            assert_eq!((p.weight_a, p.weight_b), (2, 2));
            assert_eq!(region.edge_endpoints(p.balance_edge.unwrap()), (1, 2));
            assert_eq!(out.q_count, 1);
            assert_eq!(out.stats.stages, 0, "no cells, nothing to walk");
        }
    }

    #[test]
    fn path5_is_always_bot() {
        let region = grid_block(5, 1);
        let mut rng = WalkRng::new(12, 0);
        for _ in 0..10 {
            let out = sample_balanced(&region, &cfg(), &mut rng).unwrap();
            assert!(out.partition.is_none(), "odd total weight cannot balance");
            assert_eq!(out.q_count, 0);
            assert!(!out.stats.precheck_rejected, "bot comes from the atomic center");
        }
    }

    #[test]
    fn c4_yields_both_halvings_evenly() {
        let region = grid_block(2, 2);
        let mut rng = WalkRng::new(13, 0);
        let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
        for _ in 0..400 {
            let out = sample_balanced(&region, &cfg(), &mut rng).unwrap();
            let p = out.partition.expect("C4 always splits");
            assert_eq!(p.weight_a, 2);
            assert!(out.stats.stages >= 1);
            counts.entry(p.side_a.clone()).or_default();
            *counts.get_mut(&p.side_a).unwrap() += 1;
        }
        // Vertices sort as (0,0),(0,1),(1,0),(1,1); the connected halvings
        // are the two columns or the two rows.
        assert_eq!(counts.len(), 2);
        for (key, c) in &counts {
            assert!(key == &vec![0, 1] || key == &vec![0, 2], "bad side {key:?}");
            assert!((140..=260).contains(c), "lopsided halving count {c}");
        }
    }

    #[test]
    fn matches_exact_distribution_on_2x3() {
        let region = grid_block(3, 2);
        let exact = split_distribution_by_trees(&region, 0).unwrap();
        let keys: Vec<Vec<u32>> = exact.probs.keys().cloned().collect();
        let mut expected: Vec<f64> = exact
            .probs
            .values()
            .map(|p| p.to_f64().unwrap())
            .collect();
        expected.push(exact.bot.to_f64().unwrap());

        let mut rng = WalkRng::new(14, 0);
        let mut observed = vec![0u64; keys.len() + 1];
        for _ in 0..3000 {
            let out = sample_balanced(&region, &cfg(), &mut rng).unwrap();
            match out.partition {
                Some(p) => {
                    let i = keys.iter().position(|k| k == &p.side_a).expect("known split");
                    observed[i] += 1;
                    assert_eq!(out.q_count, 1);
                }
                None => {
                    observed[keys.len()] += 1;
                    assert_eq!(out.q_count, 0);
                }
            }
        }
        let res = chi_square_gof(&observed, &expected);
        assert!(res.p_value > 1e-3, "chi2 = {}, p = {}", res.statistic, res.p_value);
    }

    #[test]
    fn policies_agree_on_2x3() {
        let region = grid_block(3, 2);
        let exact = split_distribution_by_trees(&region, 0).unwrap();
        let keys: Vec<Vec<u32>> = exact.probs.keys().cloned().collect();
        let tally = |policy: PolicyParams, seed: u64| -> Vec<u64> {
            let cfg = SamplerConfig { policy, use_precheck: true };
            let mut rng = WalkRng::new(seed, 0);
            let mut obs = vec![0u64; keys.len() + 1];
            for _ in 0..2000 {
                let out = sample_balanced(&region, &cfg, &mut rng).unwrap();
                match out.partition {
                    Some(p) => obs[keys.iter().position(|k| k == &p.side_a).unwrap()] += 1,
                    None => obs[keys.len()] += 1,
                }
            }
            obs
        };
        let a = tally(PolicyParams::paper(), 15);
        let b = tally(PolicyParams::uniform_random(), 16);
        let res = chi_square_two_sample(&a, &b);
        assert!(res.p_value > 1e-3, "policies diverge: chi2 = {}, p = {}", res.statistic, res.p_value);
    }

    #[test]
    fn traced_outcome_replays_from_tree_on_2x3() {
        let region = grid_block(3, 2);
        let total = region.total_weight();
        let mut rng = WalkRng::new(17, 0);
        for _ in 0..300 {
            let (out, tree) = sample_balanced_traced(&region, &cfg(), &mut rng).unwrap();
            assert_eq!(tree.len(), region.vertex_count() - 1);
            let balance: Vec<_> = tree_side_weights(&region, &tree)
                .into_iter()
                .filter(|&(_, w, _)| 2 * w == total)
                .collect();
            assert_eq!(balance.len() as u64, out.q_count);
            match out.partition {
                Some(p) => {
                    let (e, _, side) = &balance[0];
                    assert_eq!(p.balance_edge, Some(*e));
                    let mut got = if side.contains(&0) { p.side_a.clone() } else { p.side_b.clone() };
                    got.sort_unstable();
                    assert_eq!(&got, side);
                }
                None => assert!(balance.is_empty()),
            }
        }
    }

    #[test]
    fn precheck_rejects_block_with_unfillable_window() {
        // A 4x4 block (weight 16) with three 16-vertex arms: a balanced
        // side would need block weight x in 1..=15 plus whole arms to hit
        // 32, so x would have to be a multiple of 16. No completion works,
        // and the door window (arc sums 0/32/64/96 vs. the feasible band
        // 34..=62, doubled) proves it before any walk runs.
        let mut verts: Vec<(i32, i32)> = Vec::new();
        for x in 0..4 {
            for y in 0..4 {
                verts.push((x, y));
            }
        }
        verts.extend((4..20).map(|x| (x, 1)));
        verts.extend((-16..0).map(|x| (x, 2)));
        verts.extend((4..20).map(|y| (1, y)));
        let region = build_grid_region(&verts, None).unwrap();
        assert!(region.is_simply_connected());
        assert_eq!(region.total_weight(), 64);

        let mut rng = WalkRng::new(18, 0);
        let out = sample_balanced(&region, &cfg(), &mut rng).unwrap();
        assert!(out.partition.is_none());
        assert!(out.stats.precheck_rejected);
        assert_eq!(out.stats.stages, 0, "prune must fire before any walk");

        // Without the prune the sampler grinds to the same verdict.
        let no_prune = SamplerConfig { use_precheck: false, ..cfg() };
        let out = sample_balanced(&region, &no_prune, &mut rng).unwrap();
        assert!(out.partition.is_none());
        assert!(!out.stats.precheck_rejected);
        assert!(out.stats.stages > 0);
    }

    #[test]
    fn ust_on_tree_shaped_region_is_its_edge_set() {
        let region = grid_block(5, 1);
        let mut rng = WalkRng::new(19, 0);
        let (tree, stats) = sample_ust(&region, &cfg(), &mut rng).unwrap();
        assert_eq!(tree, vec![0, 1, 2, 3]);
        assert_eq!(stats.stages, 0);
    }

    #[test]
    fn ust_uniform_over_c4_trees() {
        let region = grid_block(2, 2);
        let mut rng = WalkRng::new(20, 0);
        let mut missing = vec![0u64; 4];
        for _ in 0..2000 {
            let (tree, _) = sample_ust(&region, &cfg(), &mut rng).unwrap();
            assert_eq!(tree.len(), 3);
            let gone = (0..4u32).find(|e| !tree.contains(e)).unwrap();
            missing[gone as usize] += 1;
        }
        let res = chi_square_gof(&missing, &[0.25; 4]);
        assert!(res.p_value > 1e-3, "chi2 = {}, p = {}", res.statistic, res.p_value);
    }

    #[test]
    fn ust_uniform_over_2x3_trees() {
        let region = grid_block(3, 2);
        let mut rng = WalkRng::new(21, 0);
        let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        for _ in 0..3000 {
            let (tree, _) = sample_ust(&region, &cfg(), &mut rng).unwrap();
            *counts.entry(tree).or_default() += 1;
        }
        assert_eq!(counts.len(), 15, "2x3 grid has 15 spanning trees");
        let obs: Vec<u64> = counts.values().copied().collect();
        let res = chi_square_gof(&obs, &vec![1.0 / 15.0; 15]);
        assert!(res.p_value > 1e-3, "chi2 = {}, p = {}", res.statistic, res.p_value);
    }

    #[test]
    fn q1_on_path6_counts_three_and_picks_uniformly() {
        let region = grid_block(6, 1);
        let mut rng = WalkRng::new(22, 0);
        let mut by_weight = [0u64; 3]; // splits 2|4, 3|3, 4|2
        for _ in 0..1200 {
            let out = sample_q_balanced(&region, 1, &cfg(), &mut rng).unwrap();
            assert_eq!(out.q_count, 3);
            let p = out.partition.unwrap();
            assert!(p.weight_a.abs_diff(3) <= 1);
            by_weight[p.side_a.len() - 2] += 1;
        }
        let res = chi_square_gof(&by_weight, &[1.0 / 3.0; 3]);
        assert!(res.p_value > 1e-3, "chi2 = {}, p = {}", res.statistic, res.p_value);
    }

    #[test]
    fn q1_on_c4_always_counts_three() {
        let region = grid_block(2, 2);
        let mut rng = WalkRng::new(23, 0);
        for _ in 0..300 {
            let out = sample_q_balanced(&region, 1, &cfg(), &mut rng).unwrap();
            assert_eq!(out.q_count, 3, "every C4 tree is a 4-path with 3 near-balance edges");
            let p = out.partition.unwrap();
            assert!(p.weight_a.abs_diff(2) <= 1);
        }
    }

    #[test]
    fn q0_agrees_with_exact_sampler_on_2x3() {
        let region = grid_block(3, 2);
        let exact = split_distribution_by_trees(&region, 0).unwrap();
        let keys: Vec<Vec<u32>> = exact.probs.keys().cloned().collect();
        let mut obs_q = vec![0u64; keys.len() + 1];
        let mut obs_b = vec![0u64; keys.len() + 1];
        let mut rng = WalkRng::new(24, 0);
        for _ in 0..1500 {
            let out = sample_q_balanced(&region, 0, &cfg(), &mut rng).unwrap();
            assert!(out.q_count <= 1);
            match out.partition {
                Some(p) => obs_q[keys.iter().position(|k| k == &p.side_a).unwrap()] += 1,
                None => obs_q[keys.len()] += 1,
            }
            let out = sample_balanced(&region, &cfg(), &mut rng).unwrap();
            match out.partition {
                Some(p) => obs_b[keys.iter().position(|k| k == &p.side_a).unwrap()] += 1,
                None => obs_b[keys.len()] += 1,
            }
        }
        let res = chi_square_two_sample(&obs_q, &obs_b);
        assert!(res.p_value > 1e-3, "q=0 diverges from exact: p = {}", res.p_value);
    }

    #[test]
    fn q_trace_count_matches_tree_on_3x3() {
        let region = grid_block(3, 3);
        let total = region.total_weight();
        let q = 1u64;
        let mut rng = WalkRng::new(25, 0);
        for _ in 0..150 {
            let (out, tree) = sample_q_balanced_traced(&region, q, &cfg(), &mut rng).unwrap();
            let near: Vec<_> = tree_side_weights(&region, &tree)
                .into_iter()
                .filter(|&(_, w, _)| 2 * w.max(total - w) <= total + 2 * q)
                .collect();
            assert_eq!(near.len() as u64, out.q_count);
            if let Some(p) = out.partition {
                let e = p.balance_edge.unwrap();
                let (_, _, side) = near.iter().find(|&&(ne, _, _)| ne == e).expect("chosen edge is near-balanced");
                let got = if side.contains(&0) { &p.side_a } else { &p.side_b };
                assert_eq!(got, side);
            } else {
                assert!(near.is_empty());
            }
        }
    }

    #[test]
    fn q_too_large_is_refused() {
        let region = grid_block(3, 2);
        let mut rng = WalkRng::new(26, 0);
        let err = sample_q_balanced(&region, 4, &cfg(), &mut rng).unwrap_err();
        assert_eq!(err, SampleError::QTooLarge { q: 4, total: 6 });
        // Slack of exactly half the total is degenerate but well-formed.
        assert!(sample_q_balanced(&region, 3, &cfg(), &mut rng).is_ok());
    }

    #[test]
    fn holed_region_is_refused() {
        let ring: Vec<(i32, i32)> = vec![
            (0, 0), (1, 0), (2, 0), (0, 1), (2, 1), (0, 2), (1, 2), (2, 2),
        ];
        let region = build_grid_region(&ring, None).unwrap();
        assert!(!region.is_simply_connected());
        let mut rng = WalkRng::new(27, 0);
        assert_eq!(
            sample_balanced(&region, &cfg(), &mut rng).unwrap_err(),
            SampleError::NotSimplyConnected
        );
        assert!(sample_ust(&region, &cfg(), &mut rng).is_err());
        assert!(sample_q_balanced(&region, 0, &cfg(), &mut rng).is_err());
    }
}
