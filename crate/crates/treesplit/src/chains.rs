//! Recombination Markov chains over k-district plans.
//!
//! A step picks a uniformly random pair of adjacent districts, redraws
//! their union as a tree-weighted 2-split, and replaces the pair. Two
//! drivers share that move: [`recom_step`] always accepts a successful
//! split, while [`revrecom_step`] adds an acceptance filter making the
//! chain reversible with stationary weights proportional to the product
//! of district spanning-tree counts. Pairs whose union is not simply
//! connected are never recombined — the walk machinery needs hole-free
//! regions — and both drivers count how often such pairs are seen.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::Coord;
use crate::region::{build_grid_region, PlanarRegion};
use crate::rng::WalkRng;
use crate::sampler::{sample_balanced, sample_q_balanced, SampleError, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("a chain needs at least two districts, got k = {0}")]
    DegenerateDistrictCount(u32),
    #[error("no connected balanced initial plan found for k = {k}, q = {q}")]
    InfeasibleBalance { k: u32, q: u64 },
    #[error("district {0} is empty or disconnected")]
    DisconnectedDistrict(u32),
    #[error("district {district} weight {weight} is outside the balance window")]
    UnbalancedDistrict { district: u32, weight: u64 },
    #[error("assignment must label {expect} vertices, got {got}")]
    BadAssignment { expect: usize, got: usize },
}

/// A k-district plan: every vertex assigned to one of k connected
/// districts, each district weight within ±q of total/k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    k: u32,
    assignment: Vec<u32>,
    weights: Vec<u64>,
    /// Cut-edge counts per district pair, k×k row-major, symmetric.
    cut: Vec<u32>,
}

impl Plan {
    pub fn from_assignment(
        region: &PlanarRegion,
        k: u32,
        assignment: &[u32],
        q: u64,
    ) -> Result<Plan, ChainError> {
        if k < 2 {
            return Err(ChainError::DegenerateDistrictCount(k));
        }
        if assignment.len() != region.vertex_count() {
            return Err(ChainError::BadAssignment {
                expect: region.vertex_count(),
                got: assignment.len(),
            });
        }
        let mut plan = Plan {
            k,
            assignment: assignment.to_vec(),
            weights: vec![0; k as usize],
            cut: vec![0; (k * k) as usize],
        };
        for (v, &d) in assignment.iter().enumerate() {
            if d >= k {
                return Err(ChainError::BadAssignment { expect: k as usize, got: d as usize });
            }
            plan.weights[d as usize] += region.weight(v as u32);
        }
        plan.rebuild_cut(region);
        plan.validate(region, q)?;
        Ok(plan)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn district(&self, v: u32) -> u32 {
        self.assignment[v as usize]
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn cut_between(&self, a: u32, b: u32) -> u32 {
        self.cut[(a * self.k + b) as usize]
    }

    /// Unordered district pairs sharing at least one cut edge, in
    /// lexicographic order.
    pub fn adjacent_pairs(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for a in 0..self.k {
            for b in a + 1..self.k {
                if self.cut_between(a, b) > 0 {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Sorted vertex ids of two districts together.
    pub fn district_union(&self, a: u32, b: u32) -> Vec<u32> {
        (0..self.assignment.len() as u32)
            .filter(|&v| {
                let d = self.assignment[v as usize];
                d == a || d == b
            })
            .collect()
    }

    /// Assignment with districts relabeled in order of first appearance,
    /// so label permutations of the same partition compare equal.
    pub fn canonical_key(&self) -> Vec<u32> {
        let mut map = vec![u32::MAX; self.k as usize];
        let mut next = 0;
        self.assignment
            .iter()
            .map(|&d| {
                if map[d as usize] == u32::MAX {
                    map[d as usize] = next;
                    next += 1;
                }
                map[d as usize]
            })
            .collect()
    }

    pub fn validate(&self, region: &PlanarRegion, q: u64) -> Result<(), ChainError> {
        let total = region.total_weight();
        let kk = u64::from(self.k);
        debug_assert_eq!(self.weights.iter().sum::<u64>(), total);
        for d in 0..self.k {
            let w = self.weights[d as usize];
            if (kk * w).abs_diff(total) > kk * q {
                return Err(ChainError::UnbalancedDistrict { district: d, weight: w });
            }
            if !self.district_connected(region, d) {
                return Err(ChainError::DisconnectedDistrict(d));
            }
        }
        Ok(())
    }

    fn district_connected(&self, region: &PlanarRegion, d: u32) -> bool {
        let members: Vec<u32> = (0..self.assignment.len() as u32)
            .filter(|&v| self.assignment[v as usize] == d)
            .collect();
        let Some(&start) = members.first() else {
            return false;
        };
        let mut seen = HashSet::with_capacity(members.len());
        seen.insert(start);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for dir in 0..4 {
                let Some(u) = region.neighbor(v, dir) else { continue };
                if self.assignment[u as usize] == d && seen.insert(u) {
                    stack.push(u);
                }
            }
        }
        seen.len() == members.len()
    }

    fn rebuild_cut(&mut self, region: &PlanarRegion) {
        self.cut.fill(0);
        for &(u, v) in region.edges() {
            let (du, dv) = (self.assignment[u as usize], self.assignment[v as usize]);
            if du != dv {
                self.cut[(du * self.k + dv) as usize] += 1;
                self.cut[(dv * self.k + du) as usize] += 1;
            }
        }
    }

    /// Reassign the union of districts `di`, `dj` according to a fresh
    /// 2-split and refresh the cut entries those two rows own.
    fn apply_split(
        &mut self,
        region: &PlanarRegion,
        union_verts: &[u32],
        side_a: &[u32],
        di: u32,
        dj: u32,
        a_to_di: bool,
    ) {
        let (da, db) = if a_to_di { (di, dj) } else { (dj, di) };
        let mut wa = 0;
        let mut wb = 0;
        for &v in union_verts {
            if side_a.binary_search(&v).is_ok() {
                self.assignment[v as usize] = da;
                wa += region.weight(v);
            } else {
                self.assignment[v as usize] = db;
                wb += region.weight(v);
            }
        }
        self.weights[da as usize] = wa;
        self.weights[db as usize] = wb;
        // Only pairs involving di or dj can change: every other edge kept
        // both endpoints in unchanged districts.
        let k = self.k;
        for x in 0..k {
            for d in [di, dj] {
                self.cut[(d * k + x) as usize] = 0;
                self.cut[(x * k + d) as usize] = 0;
            }
        }
        for &v in union_verts {
            let dv = self.assignment[v as usize];
            for dir in 0..4 {
                let Some(u) = region.neighbor(v, dir) else { continue };
                let du = self.assignment[u as usize];
                if du == dv {
                    continue;
                }
                if (du == di || du == dj) && u < v {
                    continue; // already counted from the other endpoint
                }
                self.cut[(dv * k + du) as usize] += 1;
                self.cut[(du * k + dv) as usize] += 1;
            }
        }
    }
}

fn plan_key_hash(plan: &Plan) -> u64 {
    let mut h = DefaultHasher::new();
    plan.canonical_key().hash(&mut h);
    h.finish()
}

/// How the starting plan was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Stripes,
    Bisection,
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Stripes => "stripes",
            InitKind::Bisection => "bisection",
        })
    }
}

/// Deterministic starting plan: contiguous column stripes of equal weight
/// when that happens to be feasible, otherwise a seeded random-tree
/// bisection recursion.
pub fn initial_plan(
    region: &PlanarRegion,
    k: u32,
    q: u64,
    rng: &mut WalkRng,
) -> Result<(Plan, InitKind), ChainError> {
    if k < 2 {
        return Err(ChainError::DegenerateDistrictCount(k));
    }
    if (k as usize) > region.vertex_count() {
        return Err(ChainError::InfeasibleBalance { k, q });
    }
    if let Some(asg) = stripes_assignment(region, k) {
        if let Ok(plan) = Plan::from_assignment(region, k, &asg, q) {
            return Ok((plan, InitKind::Stripes));
        }
    }
    let asg = bisection_assignment(region, k, q, rng)?;
    let plan = Plan::from_assignment(region, k, &asg, q)?;
    Ok((plan, InitKind::Bisection))
}

/// Sweep columns left to right, closing each district once its share of
/// the total weight is reached. Validation happens in the caller.
fn stripes_assignment(region: &PlanarRegion, k: u32) -> Option<Vec<u32>> {
    let verts = region.vertices();
    let total = region.total_weight();
    let kk = u64::from(k);
    let mut assignment = vec![0u32; verts.len()];
    let mut d = 0u32;
    let mut cum = 0u64;
    let mut i = 0;
    while i < verts.len() {
        let x = verts[i].0;
        let mut j = i;
        while j < verts.len() && verts[j].0 == x {
            cum += region.weight(j as u32);
            j += 1;
        }
        for slot in assignment.iter_mut().take(j).skip(i) {
            *slot = d;
        }
        if kk * cum >= u64::from(d + 1) * total && d + 1 < k {
            d += 1;
        }
        i = j;
    }
    (d + 1 == k).then_some(assignment)
}

fn bisection_assignment(
    region: &PlanarRegion,
    k: u32,
    q: u64,
    rng: &mut WalkRng,
) -> Result<Vec<u32>, ChainError> {
    let mut assignment = vec![u32::MAX; region.vertex_count()];
    let verts: Vec<u32> = (0..region.vertex_count() as u32).collect();
    let mut next = 0;
    bisect(region, &verts, k, k, q, rng, &mut next, &mut assignment)?;
    Ok(assignment)
}

/// Recursively split `verts` into `kk` districts by cutting random
/// spanning trees at weight-feasible edges. Every side is anchored to the
/// global per-district share, so slack never compounds down the
/// recursion.
#[allow(clippy::too_many_arguments)]
fn bisect(
    region: &PlanarRegion,
    verts: &[u32],
    kk: u32,
    k_all: u32,
    q: u64,
    rng: &mut WalkRng,
    next: &mut u32,
    assignment: &mut [u32],
) -> Result<(), ChainError> {
    if kk == 1 {
        for &v in verts {
            assignment[v as usize] = *next;
        }
        *next += 1;
        return Ok(());
    }
    let k1 = kk / 2;
    let k2 = kk - k1;
    let total = region.total_weight();
    let fits = |w: u64, parts: u32| {
        (u64::from(k_all) * w).abs_diff(u64::from(parts) * total) <= u64::from(k_all) * q
    };
    for _ in 0..64 {
        let (edges, below) = random_tree_cut_weights(region, verts, rng);
        // Candidate cuts: (edge index, does the below side take k1).
        let set_w: u64 = verts.iter().map(|&v| region.weight(v)).sum();
        let mut cands: Vec<(usize, bool)> = Vec::new();
        for (i, &b) in below.iter().enumerate() {
            if fits(b, k1) && fits(set_w - b, k2) {
                cands.push((i, true));
            }
            if k1 != k2 && fits(b, k2) && fits(set_w - b, k1) {
                cands.push((i, false));
            }
        }
        if cands.is_empty() {
            continue;
        }
        let (ci, below_takes_k1) = cands[rng.random_range(0..cands.len())];
        let side_below = tree_side(verts, &edges, ci);
        let side_rest: Vec<u32> = verts
            .iter()
            .copied()
            .filter(|v| side_below.binary_search(v).is_err())
            .collect();
        let (sa, ka, sb, kb) = if below_takes_k1 {
            (side_below, k1, side_rest, k2)
        } else {
            (side_below, k2, side_rest, k1)
        };
        bisect(region, &sa, ka, k_all, q, rng, next, assignment)?;
        bisect(region, &sb, kb, k_all, q, rng, next, assignment)?;
        return Ok(());
    }
    Err(ChainError::InfeasibleBalance { k: k_all, q })
}

/// Wilson's algorithm on the subgraph induced by `verts` (sorted): random
/// spanning tree as local-id (parent, child) edges plus, per edge, the
/// weight hanging below the child.
fn random_tree_cut_weights(
    region: &PlanarRegion,
    verts: &[u32],
    rng: &mut WalkRng,
) -> (Vec<(u32, u32)>, Vec<u64>) {
    let n = verts.len();
    debug_assert!(n >= 2);
    let local = |gv: u32| verts.binary_search(&gv).ok();
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    let mut succ = vec![u32::MAX; n];
    for start in 0..n {
        let mut v = start;
        while !in_tree[v] {
            let gv = verts[v];
            let mut cands = [0u32; 4];
            let mut c = 0;
            for dir in 0..4 {
                if let Some(gu) = region.neighbor(gv, dir) {
                    if let Some(lu) = local(gu) {
                        cands[c] = lu as u32;
                        c += 1;
                    }
                }
            }
            debug_assert!(c > 0, "induced subgraph must be connected");
            succ[v] = cands[rng.random_range(0..c)];
            v = succ[v] as usize;
        }
        let mut v = start;
        while !in_tree[v] {
            in_tree[v] = true;
            v = succ[v] as usize;
        }
    }
    // Every non-root vertex keeps its final, loop-erased successor.
    let edges: Vec<(u32, u32)> = (0..n as u32)
        .filter(|&v| succ[v as usize] != u32::MAX)
        .map(|v| (succ[v as usize], v))
        .collect();
    debug_assert_eq!(edges.len(), n - 1);

    // Below-weights by processing vertices farthest-first along succ chains.
    let mut below: Vec<u64> = verts.iter().map(|&g| region.weight(g)).collect();
    let mut indeg = vec![0u32; n];
    for &(p, _) in &edges {
        indeg[p as usize] += 1;
    }
    let mut queue: Vec<u32> = (0..n as u32).filter(|&v| indeg[v as usize] == 0).collect();
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        let p = succ[v as usize];
        if p == u32::MAX {
            continue;
        }
        below[p as usize] += below[v as usize];
        indeg[p as usize] -= 1;
        if indeg[p as usize] == 0 {
            queue.push(p);
        }
    }
    let edge_below: Vec<u64> = edges.iter().map(|&(_, c)| below[c as usize]).collect();
    (edges, edge_below)
}

/// Global ids (sorted) of the vertices at or below the child of tree edge
/// `cut`, not crossing it.
fn tree_side(verts: &[u32], edges: &[(u32, u32)], cut: usize) -> Vec<u32> {
    let n = verts.len();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, &(p, c)) in edges.iter().enumerate() {
        if i == cut {
            continue;
        }
        adj[p as usize].push(c);
        adj[c as usize].push(p);
    }
    let root = edges[cut].1;
    let mut seen = vec![false; n];
    seen[root as usize] = true;
    let mut stack = vec![root];
    let mut side = vec![verts[root as usize]];
    while let Some(v) = stack.pop() {
        for &u in &adj[v as usize] {
            if !seen[u as usize] {
                seen[u as usize] = true;
                side.push(verts[u as usize]);
                stack.push(u);
            }
        }
    }
    side.sort_unstable();
    side
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    /// The pair was recombined and the plan changed.
    Accepted,
    /// The chosen pair's union is not simply connected; never recombined.
    RejectedNonSc,
    /// The implicit tree of the union had no (near-)balance edge.
    RejectedBot,
    /// The reversibility filter declined the proposal.
    RejectedFilter,
    /// The proposed districts broke the plan-level balance window.
    RejectedQuota,
    /// The union was too small for the requested slack to mean anything.
    RejectedDegenerate,
}

/// One ReCom move: uniformly random adjacent pair, tree-weighted redraw
/// of their union, accept any successful split. Rejections self-loop.
pub fn recom_step(
    region: &PlanarRegion,
    plan: &mut Plan,
    q: u64,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
) -> StepOutcome {
    step(region, plan, q, cfg, rng, false)
}

/// One RevReCom move: as [`recom_step`] plus the acceptance filter of
/// [`revrecom_acceptance`], making the chain reversible for plan weights
/// proportional to the product of district spanning-tree counts.
pub fn revrecom_step(
    region: &PlanarRegion,
    plan: &mut Plan,
    q: u64,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
) -> StepOutcome {
    step(region, plan, q, cfg, rng, true)
}

/// Acceptance probability of a proposed recombination, targeting plan
/// weights proportional to the product of district spanning-tree counts.
/// Two factors: `q_count / (2q+1)` flattens the pick-one-of-k(T) edge
/// choice into a uniform per-(tree, edge) proposal density (2q+1 bounds
/// the count for positive integer weights), after which summing over
/// realizations leaves a proposal mass of τ(A)·τ(B)·cut(A,B) per split;
/// the Metropolis ratio of pair-count times cut-size then cancels
/// everything but the target. Kept as the single switchable definition of
/// the chain's filter.
fn revrecom_acceptance(
    q: u64,
    q_count: u64,
    pairs_before: usize,
    cut_before: u32,
    pairs_after: usize,
    cut_after: u32,
) -> f64 {
    debug_assert!(q_count >= 1 && q_count <= 2 * q + 1);
    let pre = q_count as f64 / (2 * q + 1) as f64;
    let ratio = (pairs_before as f64 * f64::from(cut_before))
        / (pairs_after as f64 * f64::from(cut_after));
    pre * ratio.min(1.0)
}

fn step(
    region: &PlanarRegion,
    plan: &mut Plan,
    q: u64,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
    reversible: bool,
) -> StepOutcome {
    let pairs = plan.adjacent_pairs();
    debug_assert!(!pairs.is_empty(), "a valid plan with k >= 2 has adjacent districts");
    let (di, dj) = pairs[rng.random_range(0..pairs.len())];
    let union_verts = plan.district_union(di, dj);
    let coords: Vec<Coord> = union_verts.iter().map(|&v| region.vertex(v)).collect();
    let wmap: HashMap<Coord, u64> = union_verts
        .iter()
        .map(|&v| (region.vertex(v), region.weight(v)))
        .collect();
    let union = build_grid_region(&coords, Some(&wmap)).expect("districts form a valid subregion");
    if !union.is_simply_connected() {
        return StepOutcome::RejectedNonSc;
    }
    let drawn = if q == 0 {
        sample_balanced(&union, cfg, rng)
    } else {
        sample_q_balanced(&union, q, cfg, rng)
    };
    let outcome = match drawn {
        Ok(o) => o,
        Err(SampleError::QTooLarge { .. }) => return StepOutcome::RejectedDegenerate,
        Err(SampleError::NotSimplyConnected) => unreachable!("checked before sampling"),
    };
    let Some(p) = outcome.partition else {
        return StepOutcome::RejectedBot;
    };
    // Union-local ids map to global ids by rank: both sides sort by
    // coordinate.
    debug_assert_eq!(union.vertex_count(), union_verts.len());
    let total = region.total_weight();
    let kk = u64::from(plan.k());
    let quota = |w: u64| (kk * w).abs_diff(total) <= kk * q;
    if !(quota(p.weight_a) && quota(p.weight_b)) {
        return StepOutcome::RejectedQuota;
    }
    let side_a: Vec<u32> = p.side_a.iter().map(|&lv| union_verts[lv as usize]).collect();
    // Labels are part of the chain state; a fair orientation coin keeps
    // the proposal symmetric without a canonical side rule.
    let a_to_di = rng.random_bool(0.5);
    let accepted = if reversible {
        let pairs_before = pairs.len();
        let cut_before = plan.cut_between(di, dj);
        let cut_after = p.cut_size(&union) as u32;
        let saved = plan.clone();
        plan.apply_split(region, &union_verts, &side_a, di, dj, a_to_di);
        let pairs_after = plan.adjacent_pairs().len();
        let alpha =
            revrecom_acceptance(q, outcome.q_count, pairs_before, cut_before, pairs_after, cut_after);
        if rng.random_bool(alpha.clamp(0.0, 1.0)) {
            true
        } else {
            *plan = saved;
            false
        }
    } else {
        plan.apply_split(region, &union_verts, &side_a, di, dj, a_to_di);
        true
    };
    if accepted {
        #[cfg(debug_assertions)]
        plan.validate(region, q).expect("accepted plan must stay valid");
        StepOutcome::Accepted
    } else {
        StepOutcome::RejectedFilter
    }
}

/// Whether any adjacent district pair of `plan` has a union that is not
/// simply connected.
pub fn plan_has_non_sc_pair(region: &PlanarRegion, plan: &Plan) -> bool {
    plan.adjacent_pairs().iter().any(|&(a, b)| {
        let verts = plan.district_union(a, b);
        let coords: Vec<Coord> = verts.iter().map(|&v| region.vertex(v)).collect();
        match build_grid_region(&coords, None) {
            Ok(r) => !r.is_simply_connected(),
            Err(_) => true,
        }
    })
}

/// Counters for one chain run. All rejections count as steps; a plan is
/// "visited" once per step landing on it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainStats {
    pub steps: u64,
    pub accepted: u64,
    /// Step-visits of plans containing an adjacent pair with a
    /// non-simply-connected union.
    pub plans_with_non_sc_pair: u64,
    /// Distinct such plans (canonicalized over district labels).
    pub distinct_non_sc_plans: u64,
    /// Successful recombinations of non-simply-connected pairs; zero by
    /// construction under the rejection policy.
    pub non_sc_recombinations: u64,
    pub bot_rejections: u64,
    pub sc_rejections: u64,
    pub filter_rejections: u64,
    pub quota_rejections: u64,
    pub degenerate_rejections: u64,
    pub wall_time_ms: u64,
}

/// Drive one seeded chain for `steps` moves. `on_plan` observes the plan
/// after every step (for occupancy tallies or snapshot sinks).
#[allow(clippy::too_many_arguments)]
pub fn run_chain(
    region: &PlanarRegion,
    k: u32,
    q: u64,
    method: Method,
    steps: u64,
    cfg: &SamplerConfig,
    rng: &mut WalkRng,
    mut on_plan: impl FnMut(u64, &Plan),
) -> Result<(Plan, ChainStats, InitKind), ChainError> {
    let t0 = Instant::now();
    let (mut plan, init) = initial_plan(region, k, q, rng)?;
    let mut stats = ChainStats::default();
    let mut non_sc_now = plan_has_non_sc_pair(region, &plan);
    let mut distinct: HashSet<u64> = HashSet::new();
    for s in 0..steps {
        let out = match method {
            Method::Recom => recom_step(region, &mut plan, q, cfg, rng),
            Method::RevRecom => revrecom_step(region, &mut plan, q, cfg, rng),
        };
        stats.steps += 1;
        match out {
            StepOutcome::Accepted => {
                stats.accepted += 1;
                // The indicator only moves when the plan does.
                non_sc_now = plan_has_non_sc_pair(region, &plan);
            }
            StepOutcome::RejectedNonSc => stats.sc_rejections += 1,
            StepOutcome::RejectedBot => stats.bot_rejections += 1,
            StepOutcome::RejectedFilter => stats.filter_rejections += 1,
            StepOutcome::RejectedQuota => stats.quota_rejections += 1,
            StepOutcome::RejectedDegenerate => stats.degenerate_rejections += 1,
        }
        if non_sc_now {
            stats.plans_with_non_sc_pair += 1;
            distinct.insert(plan_key_hash(&plan));
        }
        on_plan(s + 1, &plan);
    }
    stats.distinct_non_sc_plans = distinct.len() as u64;
    stats.wall_time_ms = t0.elapsed().as_millis() as u64;
    Ok((plan, stats, init))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Recom,
    RevRecom,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Recom => "recom",
            Method::RevRecom => "revrecom",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub k: u32,
    pub q: u64,
    pub method: Method,
    pub steps: u64,
    pub trials: u32,
    pub seed: u64,
    pub sampler: SamplerConfig,
}

/// One row of the experiment table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRow {
    pub trial: u32,
    pub method: Method,
    pub k: u32,
    pub q: u64,
    pub steps: u64,
    pub accepted: u64,
    pub plans_with_non_sc_pair: u64,
    pub non_sc_recombinations: u64,
    pub wall_time_ms: u64,
    pub distinct_non_sc_plans: u64,
    pub init: InitKind,
}

/// Independent seeded trials of one chain configuration; trial i draws
/// from stream i of the experiment seed, so results do not depend on
/// scheduling.
pub fn run_experiment(
    region: &PlanarRegion,
    xc: &ExperimentConfig,
) -> Result<Vec<TrialRow>, ChainError> {
    let run_one = |trial: u32| -> Result<TrialRow, ChainError> {
        let mut rng = WalkRng::new(xc.seed, u64::from(trial));
        let (_, stats, init) =
            run_chain(region, xc.k, xc.q, xc.method, xc.steps, &xc.sampler, &mut rng, |_, _| {})?;
        debug_assert_eq!(stats.non_sc_recombinations, 0);
        Ok(TrialRow {
            trial,
            method: xc.method,
            k: xc.k,
            q: xc.q,
            steps: xc.steps,
            accepted: stats.accepted,
            plans_with_non_sc_pair: stats.plans_with_non_sc_pair,
            non_sc_recombinations: stats.non_sc_recombinations,
            wall_time_ms: stats.wall_time_ms,
            distinct_non_sc_plans: stats.distinct_non_sc_plans,
            init,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..xc.trials).into_par_iter().map(run_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..xc.trials).map(run_one).collect()
    }
}
