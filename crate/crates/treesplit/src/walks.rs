//! Loop-erased random walks and spanning-tree growth.
//!
//! Two layers live here. The generic layer samples uniform spanning trees
//! of an arbitrary [`MultiGraph`] by Wilson's algorithm and is used by
//! reference paths and tests. The lattice layer grows a spanning forest of
//! a region's wired dual in bounded *stages*: each stage starts a walk at a
//! caller-chosen cell and keeps adding loop-erased paths to the forest
//! until at least `t` walk steps have elapsed, which is what lets the
//! balanced splitter stop long before the whole tree exists.

use rand::Rng;

use crate::graph::MultiGraph;
use crate::lattice::{step, Coord};
use crate::region::{contracted_dual_graph, dual_tree_to_primal_tree, PlanarRegion};
use crate::rng::WalkRng;

/// Loop-erased random walk from `start` until `is_target` holds, as the
/// erased path of (vertices, edges). The caller must guarantee a target is
/// reachable from `start`; termination is then almost sure.
pub fn loop_erased_walk(
    g: &MultiGraph,
    start: u32,
    is_target: impl Fn(u32) -> bool,
    rng: &mut impl Rng,
) -> (Vec<u32>, Vec<u32>) {
    assert!(!is_target(start), "walk must start off-target");
    let n = g.vertex_count() as usize;
    let mut next: Vec<u32> = vec![u32::MAX; n];
    let mut on_path = vec![false; n];

    let mut v = start;
    let end;
    loop {
        let choices = g.incident(v);
        let &(u, e) = &choices[rng.random_range(0..choices.len())];
        next[v as usize] = e;
        on_path[v as usize] = true;
        if is_target(u) {
            end = u;
            break;
        }
        v = u;
    }

    let mut verts = vec![start];
    let mut edges = Vec::new();
    let mut v = start;
    while v != end {
        let e = next[v as usize];
        edges.push(e);
        let (a, b) = g.endpoints(e);
        v = if v == a { b } else { a };
        verts.push(v);
    }
    (verts, edges)
}

/// Uniform spanning tree of a connected multigraph, as edge ids.
pub fn wilson_spanning_tree(g: &MultiGraph, root: u32, rng: &mut impl Rng) -> Vec<u32> {
    wilson_spanning_tree_counted(g, root, rng).0
}

/// [`wilson_spanning_tree`] plus the total number of walk moves spent,
/// the machine-independent cost of building the whole tree at once.
/// Successor buffers are reused across walks so the cost stays
/// proportional to the moves, not walks × vertices.
pub fn wilson_spanning_tree_counted(
    g: &MultiGraph,
    root: u32,
    rng: &mut impl Rng,
) -> (Vec<u32>, u64) {
    let n = g.vertex_count();
    let mut in_tree = vec![false; n as usize];
    in_tree[root as usize] = true;
    let mut next: Vec<u32> = vec![u32::MAX; n as usize];
    let mut touched: Vec<u32> = Vec::new();
    let mut tree = Vec::with_capacity(n as usize - 1);
    let mut steps = 0u64;
    for start in 0..n {
        if in_tree[start as usize] {
            continue;
        }
        let mut v = start;
        while !in_tree[v as usize] {
            let choices = g.incident(v);
            let &(u, e) = &choices[rng.random_range(0..choices.len())];
            if next[v as usize] == u32::MAX {
                touched.push(v);
            }
            next[v as usize] = e;
            steps += 1;
            v = u;
        }
        let mut v = start;
        while !in_tree[v as usize] {
            in_tree[v as usize] = true;
            let e = next[v as usize];
            tree.push(e);
            let (a, b) = g.endpoints(e);
            v = if v == a { b } else { a };
        }
        for &t in &touched {
            next[t as usize] = u32::MAX;
        }
        touched.clear();
    }
    debug_assert_eq!(tree.len(), n as usize - 1);
    (tree, steps)
}

/// Reference full-tree path: run Wilson's algorithm on the region's
/// contracted dual and complement the result into the primal uniform
/// spanning tree it encodes. Returns sorted primal edge ids and the walk
/// moves spent; the staged samplers are benchmarked against this.
pub fn dual_wilson_tree(region: &PlanarRegion, rng: &mut WalkRng) -> (Vec<u32>, u64) {
    let g = contracted_dual_graph(region);
    let root = region.cell_count() as u32;
    let (dual_tree, steps) = wilson_spanning_tree_counted(&g, root, rng);
    let mut primal =
        dual_tree_to_primal_tree(region, &dual_tree).expect("Wilson yields a spanning tree");
    primal.sort_unstable();
    (primal, steps)
}

/// What one stage of forest growth did.
#[derive(Clone, Debug, Default)]
pub struct StageReport {
    pub steps: u64,
    pub paths_added: usize,
    /// Primal edges severed by this stage, in deletion order.
    pub deleted_edges: Vec<u32>,
    /// Surviving primal edges that became bridges during this stage, each
    /// reported exactly once over the forest's lifetime. The wired dual
    /// forest is a single tree hanging from the root, so an edge is a
    /// bridge of the surviving graph exactly when both its flanking cells
    /// are in the forest — which can only newly happen at a cell the stage
    /// just committed.
    pub new_bridges: Vec<u32>,
    pub tree_complete: bool,
    pub free_restarts: u32,
}

/// Growing spanning forest of a region's wired dual.
///
/// Vertices of the forest are the region's internal cells plus a single
/// root absorbing every other lattice cell. Walks run on lattice cells:
/// from a fresh internal cell the walk is loop-erased and each move severs
/// (on commit) the primal edge it crosses; any other cell is either in the
/// forest already or belongs to the root. The forest is complete when every
/// internal cell has joined, at which point the surviving primal edges form
/// a uniform spanning tree of the region.
pub struct DualForestState<'a> {
    region: &'a PlanarRegion,
    in_tree: Vec<bool>,
    edge_deleted: Vec<bool>,
    /// Internal cells not yet in the forest, swap-removed as they join.
    fresh: Vec<u32>,
    fresh_pos: Vec<u32>,
    next_dir: Vec<u8>,
    visit_epoch: Vec<u64>,
    epoch: u64,
    free_walk_cap: u64,
    pub total_steps: u64,
    pub stages_run: u64,
}

impl<'a> DualForestState<'a> {
    pub fn new(region: &'a PlanarRegion) -> Self {
        assert!(
            region.is_simply_connected(),
            "forest growth requires a simply connected region"
        );
        let f = region.cell_count();
        let span = {
            let (x0, y0, x1, y1) = region.bbox();
            ((x1 - x0) + (y1 - y0) + 2) as u64
        };
        DualForestState {
            region,
            in_tree: vec![false; f],
            edge_deleted: vec![false; region.edge_count()],
            fresh: (0..f as u32).collect(),
            fresh_pos: (0..f as u32).collect(),
            next_dir: vec![0; f],
            visit_epoch: vec![0; f],
            epoch: 0,
            // Defensive bound on a single unrestricted excursion. Restarting
            // an over-long excursion from a fresh cell only changes how the
            // next walk start is chosen, and Wilson growth yields the same
            // tree law for every start rule, so this cannot bias samples.
            free_walk_cap: (64 * span * span).max(1 << 14),
            total_steps: 0,
            stages_run: 0,
        }
    }

    pub fn region(&self) -> &PlanarRegion {
        self.region
    }

    pub fn is_complete(&self) -> bool {
        self.fresh.is_empty()
    }

    pub fn fresh_count(&self) -> usize {
        self.fresh.len()
    }

    /// Internal cells not yet in the forest (unordered).
    pub fn fresh_cells(&self) -> &[u32] {
        &self.fresh
    }

    pub fn cell_in_forest(&self, cell: u32) -> bool {
        self.in_tree[cell as usize]
    }

    /// Fresh means: an internal cell that has not joined the forest.
    pub fn is_fresh_coord(&self, c: Coord) -> bool {
        match self.region.cell_id(c) {
            Some(id) => !self.in_tree[id as usize],
            None => false,
        }
    }

    pub fn edge_deleted(&self, e: u32) -> bool {
        self.edge_deleted[e as usize]
    }

    pub fn deleted_count(&self) -> usize {
        self.edge_deleted.iter().filter(|&&d| d).count()
    }

    /// Primal edges not crossed by the forest.
    pub fn surviving_edges(&self) -> Vec<u32> {
        (0..self.region.edge_count() as u32)
            .filter(|&e| !self.edge_deleted[e as usize])
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn set_free_walk_cap(&mut self, cap: u64) {
        self.free_walk_cap = cap;
    }

    fn join(&mut self, cell: u32) {
        debug_assert!(!self.in_tree[cell as usize]);
        self.in_tree[cell as usize] = true;
        let pos = self.fresh_pos[cell as usize];
        let last = *self.fresh.last().unwrap();
        self.fresh.swap_remove(pos as usize);
        if last != cell {
            self.fresh_pos[last as usize] = pos;
        }
    }

    /// One stage: walk from `s`, repeatedly attaching loop-erased paths to
    /// the forest, and stop at the first path completion at or beyond `t`
    /// total steps (or when the forest completes). Between path
    /// completions the walk roams lattice cells unrestricted until it finds
    /// a fresh cell; those steps count toward `t` as well.
    pub fn run_stage(&mut self, s: Coord, t: u64, rng: &mut WalkRng) -> StageReport {
        debug_assert!(!self.is_complete(), "stage on a complete forest");
        let mut report = StageReport::default();
        let mut pos = s;
        loop {
            // Unrestricted phase: find the next fresh cell.
            let mut excursion = 0u64;
            while !self.is_fresh_coord(pos) {
                pos = step(pos, rng.random_range(0..4));
                report.steps += 1;
                excursion += 1;
                if excursion > self.free_walk_cap {
                    pos = self.region.cell(self.fresh[rng.random_range(0..self.fresh.len())]);
                    report.free_restarts += 1;
                    break;
                }
            }

            // Loop-erased phase from a fresh cell.
            self.epoch += 1;
            let phase_start = pos;
            loop {
                let cell = self
                    .region
                    .cell_id(pos)
                    .expect("loop-erased phase stays on internal cells");
                let dir = rng.random_range(0..4u8);
                self.visit_epoch[cell as usize] = self.epoch;
                self.next_dir[cell as usize] = dir;
                pos = step(pos, dir as usize);
                report.steps += 1;
                if !self.is_fresh_coord(pos) {
                    break;
                }
            }

            // Commit the erased path: everything the next-pointers trace
            // from the phase start to the terminal cell.
            let mut c = phase_start;
            while c != pos {
                let cell = self.region.cell_id(c).unwrap();
                debug_assert_eq!(self.visit_epoch[cell as usize], self.epoch);
                let dir = self.next_dir[cell as usize];
                self.join(cell);
                let e = self
                    .region
                    .crossed_edge(c, dir as usize)
                    .expect("internal cells have all four walls");
                // A severed edge always has both flanking cells in the
                // forest, so a fresh path can never re-sever one.
                debug_assert!(!self.edge_deleted[e as usize]);
                self.edge_deleted[e as usize] = true;
                report.deleted_edges.push(e);
                // Any surviving wall of the joined cell whose far side is
                // already non-fresh now flanks the forest on both sides:
                // a new bridge. Edges between two cells of this very path
                // trigger once, at whichever cell joins second.
                for d in 0..4 {
                    let f = self
                        .region
                        .crossed_edge(c, d)
                        .expect("internal cells have all four walls");
                    if !self.edge_deleted[f as usize] && !self.is_fresh_coord(step(c, d)) {
                        report.new_bridges.push(f);
                    }
                }
                c = step(c, dir as usize);
            }
            report.paths_added += 1;

            if self.is_complete() {
                report.tree_complete = true;
                break;
            }
            if report.steps >= t {
                break;
            }
        }
        self.total_steps += report.steps;
        self.stages_run += 1;
        report
    }

    /// Grows the forest to completion with uniform fresh-cell stage starts
    /// and returns the surviving primal spanning tree. Single-path stages
    /// never enter the unrestricted phase, so this is plain Wilson growth
    /// in random start order.
    pub fn complete_into_tree(&mut self, rng: &mut WalkRng) -> Vec<u32> {
        while !self.is_complete() {
            let s = self.region.cell(self.fresh[rng.random_range(0..self.fresh.len())]);
            self.run_stage(s, 1, rng);
        }
        let tree = self.surviving_edges();
        debug_assert_eq!(tree.len(), self.region.vertex_count() - 1);
        tree
    }
}
