//! Bridge-block structure of the surviving graph, maintained incrementally
//! as forest growth severs edges.
//!
//! The surviving graph (region minus severed edges) is always connected;
//! its two-edge-connected components ("blocks") joined by bridges form a
//! tree. Splitting logic lives on this tree: a bridge whose removal halves
//! the total vertex weight is a finished balanced cut, and otherwise there
//! is a unique block that any future balance edge must lie in.
//!
//! Two monotonicity facts keep maintenance cheap: severed edges stay
//! severed, and bridges stay bridges (a bridge's flanking faces already
//! coincide, so the dual forest can never pick up its dual edge). Deletion
//! batches arrive annotated with the edges that just became bridges, so a
//! bridge-free batch costs O(batch); a batch that does split a block pays
//! only for the pieces it carves off, while the dominant piece keeps its
//! id untouched. A vertex changes region only by landing in a piece no
//! heavier than roughly half its old block, so maintenance totals
//! O(n log n) over any deletion history.

use std::collections::HashMap;

use serde_json::json;

use crate::graph::DisjointSets;
use crate::lattice::{opposite, EAST, NORTH, SOUTH, WEST};
use crate::region::{PlanarRegion, UNSET};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeState {
    Intact,
    Deleted,
    /// Permanent bridge; payload is the bridge record id.
    Bridge(u32),
}

#[derive(Clone, Debug)]
struct RegionNode {
    alive: bool,
    /// Member vertex ids, unordered; positions tracked in `vert_pos`.
    verts: Vec<u32>,
    weight: u64,
    /// Incident bridge record ids, unordered; positions in `bridge_pos`.
    bridges: Vec<u32>,
}

#[derive(Clone, Copy, Debug)]
pub struct BridgeInfo {
    /// Primal edge id.
    pub edge: u32,
    /// Regions on the (lesser endpoint, greater endpoint) sides.
    pub regions: (u32, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Center {
    /// A bridge splitting the weight exactly in half.
    Edge(u32),
    /// The unique block all of whose hanging components weigh at most half.
    Region(u32),
}

/// Marks an edge already known to be a bridge whose record is not yet
/// settled (sides still being carved apart).
const PENDING_BRIDGE: u32 = u32::MAX;

pub struct RegionTree<'a> {
    region: &'a PlanarRegion,
    edge_state: Vec<EdgeState>,
    vertex_region: Vec<u32>,
    /// Index of each vertex within its region's `verts`, for O(1) moves.
    vert_pos: Vec<u32>,
    regions: Vec<RegionNode>,
    bridges: Vec<BridgeInfo>,
    /// Index of each bridge within its two regions' `bridges` lists,
    /// slots aligned with `BridgeInfo::regions`.
    bridge_pos: Vec<[u32; 2]>,
    alive_count: usize,
    // Scratch for component searches, epoch-stamped.
    scratch_id: Vec<u32>,
    scratch_epoch: Vec<u64>,
    epoch: u64,
}

impl<'a> RegionTree<'a> {
    pub fn new(region: &'a PlanarRegion) -> Self {
        let n = region.vertex_count();
        let all: Vec<u32> = (0..n as u32).collect();
        let weight = region.total_weight();
        let mut tree = RegionTree {
            region,
            edge_state: vec![EdgeState::Intact; region.edge_count()],
            vertex_region: vec![0; n],
            vert_pos: (0..n as u32).collect(),
            regions: vec![RegionNode {
                alive: true,
                verts: all,
                weight,
                bridges: Vec::new(),
            }],
            bridges: Vec::new(),
            bridge_pos: Vec::new(),
            alive_count: 1,
            scratch_id: vec![0; n],
            scratch_epoch: vec![0; n],
            epoch: 0,
        };
        // The input may have bridges of its own (tails, corridors).
        tree.decompose_block(0);
        tree
    }

    pub fn total_weight(&self) -> u64 {
        self.region.total_weight()
    }

    pub fn region_of(&self, v: u32) -> u32 {
        self.vertex_region[v as usize]
    }

    pub fn is_alive(&self, r: u32) -> bool {
        self.regions[r as usize].alive
    }

    pub fn is_atomic(&self, r: u32) -> bool {
        self.regions[r as usize].verts.len() == 1
    }

    pub fn region_weight(&self, r: u32) -> u64 {
        self.regions[r as usize].weight
    }

    /// Member vertex ids of `r`, in no particular order.
    pub fn region_verts(&self, r: u32) -> &[u32] {
        &self.regions[r as usize].verts
    }

    pub fn region_bridges(&self, r: u32) -> &[u32] {
        &self.regions[r as usize].bridges
    }

    pub fn alive_regions(&self) -> Vec<u32> {
        (0..self.regions.len() as u32)
            .filter(|&r| self.regions[r as usize].alive)
            .collect()
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    pub fn bridge(&self, b: u32) -> BridgeInfo {
        self.bridges[b as usize]
    }

    pub fn bridge_count(&self) -> usize {
        self.bridges.len()
    }

    pub fn edge_state(&self, e: u32) -> EdgeState {
        self.edge_state[e as usize]
    }

    /// Applies a batch of severed edges, splitting every block that gained
    /// a bridge. Returns the ids of the pieces carved off; a block that
    /// splits keeps its id on the dominant piece with its weight reduced,
    /// so callers caching weights by id must treat a mismatch as stale.
    ///
    /// `new_bridges` must name every surviving edge the batch turned into a
    /// bridge (forest growth reports them per stage). A block that lost
    /// edges without gaining a bridge stays connected — the surviving graph
    /// never disconnects — and therefore stays two-edge-connected, so a
    /// bridge-free batch costs O(batch) and a splitting one only what it
    /// carves off.
    pub fn apply_deletions(&mut self, edges: &[u32], new_bridges: &[u32]) -> Vec<u32> {
        for &e in edges {
            assert_eq!(
                self.edge_state[e as usize],
                EdgeState::Intact,
                "severed edge must have been intact"
            );
            self.edge_state[e as usize] = EdgeState::Deleted;
            debug_assert_eq!(
                self.vertex_region[self.region.edge_endpoints(e).0 as usize],
                self.vertex_region[self.region.edge_endpoints(e).1 as usize],
                "severed edge endpoints share a block"
            );
        }
        if new_bridges.is_empty() {
            return Vec::new();
        }
        // A batch can bridge several blocks at once; group before carving.
        let mut grouped: Vec<(u32, u32)> = new_bridges
            .iter()
            .map(|&e| {
                debug_assert_eq!(self.edge_state[e as usize], EdgeState::Intact);
                let (a, b) = self.region.edge_endpoints(e);
                let ra = self.vertex_region[a as usize];
                debug_assert_eq!(ra, self.vertex_region[b as usize]);
                (ra, e)
            })
            .collect();
        grouped.sort_unstable();
        let mut created = Vec::new();
        for group in grouped.chunk_by(|x, y| x.0 == y.0) {
            let edges_here: Vec<u32> = group.iter().map(|g| g.1).collect();
            created.extend(self.split_block(group[0].0, &edges_here));
        }
        created
    }

    /// Moves vertex `v` into region `to`, updating weights and position
    /// indices. O(1).
    fn move_vert(&mut self, v: u32, to: u32) {
        let from = self.vertex_region[v as usize];
        let pos = self.vert_pos[v as usize] as usize;
        let list = &mut self.regions[from as usize].verts;
        let moved = *list.last().expect("vertex position is in range");
        list.swap_remove(pos);
        if moved != v {
            self.vert_pos[moved as usize] = pos as u32;
        }
        let w = self.region.weight(v);
        self.regions[from as usize].weight -= w;
        let dest = &mut self.regions[to as usize];
        self.vert_pos[v as usize] = dest.verts.len() as u32;
        dest.verts.push(v);
        dest.weight += w;
        self.vertex_region[v as usize] = to;
    }

    /// Records `r` as the `slot` side of bridge `bid` and inserts the
    /// bridge into `r`'s list. O(1).
    fn attach_bridge(&mut self, bid: u32, slot: usize, r: u32) {
        let info = &mut self.bridges[bid as usize];
        if slot == 0 {
            info.regions.0 = r;
        } else {
            info.regions.1 = r;
        }
        let list = &mut self.regions[r as usize].bridges;
        self.bridge_pos[bid as usize][slot] = list.len() as u32;
        list.push(bid);
    }

    /// Removes bridge `bid` from its `slot` side's list. O(1).
    fn detach_bridge(&mut self, bid: u32, slot: usize) {
        let info = self.bridges[bid as usize];
        let r = if slot == 0 { info.regions.0 } else { info.regions.1 };
        let pos = self.bridge_pos[bid as usize][slot] as usize;
        let list = &mut self.regions[r as usize].bridges;
        let moved = *list.last().expect("bridge position is in range");
        list.swap_remove(pos);
        if moved != bid {
            let minfo = self.bridges[moved as usize];
            let mslot = usize::from(minfo.regions.1 == r);
            debug_assert!(mslot == 1 || minfo.regions.0 == r);
            self.bridge_pos[moved as usize][mslot] = pos as u32;
        }
    }

    /// Splits block `r` along `new_edges`, surviving edges that just became
    /// bridges. Components are found by searches seeded at the bridge
    /// endpoints, expanded round-robin one vertex per turn and merged on
    /// contact; every search that exhausts its component gets carved into a
    /// fresh region, and the one still running when all others are done —
    /// the dominant component, up to round-robin slack — keeps the id `r`.
    /// Cost is proportional to the carved pieces, not to the block.
    fn split_block(&mut self, r: u32, new_edges: &[u32]) -> Vec<u32> {
        debug_assert!(self.regions[r as usize].alive && !new_edges.is_empty());
        // Block the new bridges up front; the pending marker tells the
        // carving loop they are not settled records yet.
        for &e in new_edges {
            self.edge_state[e as usize] = EdgeState::Bridge(PENDING_BRIDGE);
        }

        self.epoch += 1;
        let mut searches: Vec<SplitSearch> = Vec::with_capacity(2 * new_edges.len());
        for &e in new_edges {
            let (a, b) = self.region.edge_endpoints(e);
            for v in [a, b] {
                debug_assert_eq!(self.vertex_region[v as usize], r);
                if self.scratch_epoch[v as usize] != self.epoch {
                    self.scratch_epoch[v as usize] = self.epoch;
                    self.scratch_id[v as usize] = searches.len() as u32;
                    searches.push(SplitSearch {
                        frontier: vec![v],
                        claims: vec![v],
                        parent: searches.len() as u32,
                        running: true,
                    });
                }
            }
        }

        let mut running = searches.len();
        while running > 1 {
            for i in 0..searches.len() {
                if running <= 1 {
                    break;
                }
                if searches[i].parent != i as u32 || !searches[i].running {
                    continue;
                }
                let Some(v) = searches[i].frontier.pop() else {
                    searches[i].running = false;
                    running -= 1;
                    continue;
                };
                for dir in 0..4 {
                    let Some(e) = self.region.edge_from(v, dir) else { continue };
                    if self.edge_state[e as usize] != EdgeState::Intact {
                        continue;
                    }
                    let u = self.region.neighbor(v, dir).unwrap();
                    if self.scratch_epoch[u as usize] != self.epoch {
                        self.scratch_epoch[u as usize] = self.epoch;
                        self.scratch_id[u as usize] = i as u32;
                        searches[i].frontier.push(u);
                        searches[i].claims.push(u);
                    } else {
                        let o = search_root(&mut searches, self.scratch_id[u as usize]);
                        if o != i as u32 {
                            // Two seeds in one component. A finished search
                            // has eaten its whole component, including every
                            // seed in it, so contact proves both still run;
                            // fold the other into this one.
                            debug_assert!(searches[o as usize].running);
                            searches[o as usize].parent = i as u32;
                            searches[o as usize].running = false;
                            let frontier = std::mem::take(&mut searches[o as usize].frontier);
                            let claims = std::mem::take(&mut searches[o as usize].claims);
                            searches[i].frontier.extend(frontier);
                            searches[i].claims.extend(claims);
                            running -= 1;
                        }
                    }
                }
            }
        }

        // Carve every finished component; `r` sheds the moved weight.
        let mut created = Vec::new();
        for i in 0..searches.len() {
            if searches[i].parent != i as u32 || searches[i].running {
                continue;
            }
            let claims = std::mem::take(&mut searches[i].claims);
            let id = self.regions.len() as u32;
            self.regions.push(RegionNode {
                alive: true,
                verts: Vec::with_capacity(claims.len()),
                weight: 0,
                bridges: Vec::new(),
            });
            for v in claims {
                self.move_vert(v, id);
                // Settled bridges riding on a moved vertex follow it.
                for dir in 0..4 {
                    let Some(e) = self.region.edge_from(v, dir) else { continue };
                    if let EdgeState::Bridge(bid) = self.edge_state[e as usize] {
                        if bid == PENDING_BRIDGE {
                            continue;
                        }
                        let (a, _) = self.region.edge_endpoints(e);
                        let slot = usize::from(v != a);
                        self.detach_bridge(bid, slot);
                        self.attach_bridge(bid, slot, id);
                    }
                }
            }
            self.alive_count += 1;
            created.push(id);
        }

        // Settle the new bridge records, both sides now known.
        for &e in new_edges {
            let (a, b) = self.region.edge_endpoints(e);
            let (ra, rb) = (self.vertex_region[a as usize], self.vertex_region[b as usize]);
            debug_assert_ne!(ra, rb, "a reported bridge must separate components");
            let bid = self.bridges.len() as u32;
            self.bridges.push(BridgeInfo { edge: e, regions: (ra, rb) });
            self.bridge_pos.push([0, 0]);
            self.attach_bridge(bid, 0, ra);
            self.attach_bridge(bid, 1, rb);
            self.edge_state[e as usize] = EdgeState::Bridge(bid);
        }
        created
    }

    /// First decomposition of a freshly built tree: splits block `r` (the
    /// whole region) into its two-edge-connected components. Bulk
    /// counterpart of `split_block` for when no bridges are known yet.
    fn decompose_block(&mut self, r: u32) {
        debug_assert!(self.regions[r as usize].bridges.is_empty());
        let verts = std::mem::take(&mut self.regions[r as usize].verts);
        let nl = verts.len();

        self.epoch += 1;
        for (i, &v) in verts.iter().enumerate() {
            self.scratch_id[v as usize] = i as u32;
            self.scratch_epoch[v as usize] = self.epoch;
        }
        // Local surviving edges; global intact edges never leave the block.
        let mut ledges: Vec<(u32, u32, u32)> = Vec::new(); // (la, lb, global e)
        let mut ladj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nl];
        for (i, &v) in verts.iter().enumerate() {
            for dir in [EAST, NORTH] {
                let Some(e) = self.region.edge_from(v, dir) else {
                    continue;
                };
                if self.edge_state[e as usize] != EdgeState::Intact {
                    continue;
                }
                let u = self.region.neighbor(v, dir).unwrap();
                debug_assert_eq!(self.scratch_epoch[u as usize], self.epoch);
                let j = self.scratch_id[u as usize];
                let le = ledges.len() as u32;
                ledges.push((i as u32, j, e));
                ladj[i].push((j, le));
                ladj[j as usize].push((i as u32, le));
            }
        }

        let bridge_flags = local_bridges(nl, &ladj);
        if !bridge_flags.contains(&true) {
            // Already two-edge-connected; put everything back.
            self.regions[r as usize].verts = verts;
            return;
        }

        // Blocks = components under non-bridge edges.
        let mut dsu = DisjointSets::new(nl);
        for (le, &(a, b, _)) in ledges.iter().enumerate() {
            if !bridge_flags[le] {
                dsu.union(a, b);
            }
        }
        let mut part_of_root: HashMap<u32, u32> = HashMap::new();
        let mut part_verts: Vec<Vec<u32>> = Vec::new();
        for (i, &v) in verts.iter().enumerate() {
            let root = dsu.find(i as u32);
            let part = *part_of_root.entry(root).or_insert_with(|| {
                part_verts.push(Vec::new());
                (part_verts.len() - 1) as u32
            });
            part_verts[part as usize].push(v);
        }

        let parts = part_verts.len();
        for pv in part_verts {
            let weight = pv.iter().map(|&v| self.region.weight(v)).sum();
            let id = self.regions.len() as u32;
            for (pos, &v) in pv.iter().enumerate() {
                self.vertex_region[v as usize] = id;
                self.vert_pos[v as usize] = pos as u32;
            }
            self.regions.push(RegionNode {
                alive: true,
                verts: pv,
                weight,
                bridges: Vec::new(),
            });
        }
        self.regions[r as usize].alive = false;
        self.alive_count += parts - 1;

        for (le, &(_, _, e)) in ledges.iter().enumerate() {
            if bridge_flags[le] {
                let (ga, gb) = self.region.edge_endpoints(e);
                let (ra, rb) = (
                    self.vertex_region[ga as usize],
                    self.vertex_region[gb as usize],
                );
                debug_assert_ne!(ra, rb);
                let bid = self.bridges.len() as u32;
                self.bridges.push(BridgeInfo { edge: e, regions: (ra, rb) });
                self.bridge_pos.push([0, 0]);
                self.attach_bridge(bid, 0, ra);
                self.attach_bridge(bid, 1, rb);
                self.edge_state[e as usize] = EdgeState::Bridge(bid);
            }
        }
    }

    fn bridge_other_side(&self, b: u32, from: u32) -> u32 {
        let (ra, rb) = self.bridges[b as usize].regions;
        if ra == from {
            rb
        } else {
            debug_assert_eq!(rb, from);
            ra
        }
    }

    /// Subtree weights of the block tree rooted at `root`: for every alive
    /// block, its weight counting everything on its far side of the parent
    /// bridge. Returns (dfs order, parent bridge per block, below weight).
    fn rooted_weights(&self, root: u32) -> (Vec<u32>, Vec<u32>, Vec<u64>) {
        let nr = self.regions.len();
        let mut parent_bridge = vec![UNSET; nr];
        let mut below = vec![0u64; nr];
        let mut order = Vec::with_capacity(self.alive_count);
        let mut stack = vec![root];
        let mut seen = vec![false; nr];
        seen[root as usize] = true;
        while let Some(r) = stack.pop() {
            order.push(r);
            for &b in &self.regions[r as usize].bridges {
                let o = self.bridge_other_side(b, r);
                if !seen[o as usize] {
                    seen[o as usize] = true;
                    parent_bridge[o as usize] = b;
                    stack.push(o);
                }
            }
        }
        debug_assert_eq!(order.len(), self.alive_count, "block tree is connected");
        for &r in order.iter().rev() {
            below[r as usize] += self.regions[r as usize].weight;
            let pb = parent_bridge[r as usize];
            if pb != UNSET {
                let p = self.bridge_other_side(pb, r);
                below[p as usize] += below[r as usize];
            }
        }
        (order, parent_bridge, below)
    }

    /// The exact-balance center: a bridge halving the weight if one exists
    /// (unique, since blocks have positive weight), else the unique block
    /// whose hanging components all weigh at most half.
    pub fn find_center(&self) -> Center {
        let total = self.total_weight();
        let root = self
            .alive_regions()
            .into_iter()
            .next()
            .expect("at least one block");
        let (order, parent_bridge, below) = self.rooted_weights(root);
        let mut center = None;
        for &r in &order {
            let pb = parent_bridge[r as usize];
            if pb != UNSET && 2 * below[r as usize] == total {
                return Center::Edge(pb);
            }
            let above = total - below[r as usize];
            let children_ok = self.regions[r as usize]
                .bridges
                .iter()
                .filter(|&&b| b != pb)
                .all(|&b| {
                    let c = self.bridge_other_side(b, r);
                    2 * below[c as usize] <= total
                });
            if 2 * above <= total && children_ok {
                debug_assert!(center.is_none(), "weight center is unique");
                center = Some(r);
                if cfg!(not(debug_assertions)) {
                    break;
                }
            }
        }
        Center::Region(center.expect("a weight center always exists"))
    }

    /// Bridges whose two sides both weigh at least half minus `q`.
    pub fn near_balanced_bridges(&self, q: u64) -> Vec<u32> {
        if self.alive_count <= 1 {
            return Vec::new();
        }
        let total = self.total_weight();
        let root = self.alive_regions()[0];
        let (order, parent_bridge, below) = self.rooted_weights(root);
        let mut out: Vec<u32> = order
            .iter()
            .filter_map(|&r| {
                let pb = parent_bridge[r as usize];
                if pb == UNSET {
                    return None;
                }
                let lighter = below[r as usize].min(total - below[r as usize]);
                (2 * lighter + 2 * q >= total).then_some(pb)
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Blocks that could still contain a future near-balance edge: every
    /// hanging component weighs at most half plus `q`.
    pub fn near_center_regions(&self, q: u64) -> Vec<u32> {
        let total = self.total_weight();
        let root = self.alive_regions()[0];
        let (order, parent_bridge, below) = self.rooted_weights(root);
        let mut out: Vec<u32> = order
            .iter()
            .copied()
            .filter(|&r| {
                let pb = parent_bridge[r as usize];
                let above_ok = pb == UNSET || 2 * (total - below[r as usize]) <= total + 2 * q;
                above_ok
                    && self.regions[r as usize]
                        .bridges
                        .iter()
                        .filter(|&&b| b != pb)
                        .all(|&b| {
                            let c = self.bridge_other_side(b, r);
                            2 * below[c as usize] <= total + 2 * q
                        })
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Weight hanging off each bridge of `r`, on the far side from `r`.
    pub fn hanging_weights(&self, r: u32) -> Vec<(u32, u64)> {
        let (_, parent_bridge, below) = self.rooted_weights(r);
        self.regions[r as usize]
            .bridges
            .iter()
            .map(|&b| {
                let o = self.bridge_other_side(b, r);
                debug_assert_eq!(parent_bridge[o as usize], b);
                (b, below[o as usize])
            })
            .collect()
    }

    /// Vertex sets on the two sides of a bridge, as (lesser endpoint side,
    /// greater endpoint side), each sorted.
    pub fn sides_of_bridge(&self, b: u32) -> (Vec<u32>, Vec<u32>) {
        let (ra, rb) = self.bridges[b as usize].regions;
        let mut side_a = Vec::new();
        let nr = self.regions.len();
        let mut seen = vec![false; nr];
        seen[rb as usize] = true; // block the far side
        let mut stack = vec![ra];
        seen[ra as usize] = true;
        while let Some(r) = stack.pop() {
            side_a.extend_from_slice(&self.regions[r as usize].verts);
            for &nb in &self.regions[r as usize].bridges {
                if nb == b {
                    continue;
                }
                let o = self.bridge_other_side(nb, r);
                if !seen[o as usize] {
                    seen[o as usize] = true;
                    stack.push(o);
                }
            }
        }
        side_a.sort_unstable();
        let mut in_a = vec![false; self.region.vertex_count()];
        for &v in &side_a {
            in_a[v as usize] = true;
        }
        let side_b: Vec<u32> = (0..self.region.vertex_count() as u32)
            .filter(|&v| !in_a[v as usize])
            .collect();
        (side_a, side_b)
    }

    /// Doors of a block (its incident bridges) in cyclic order around its
    /// outer boundary. `None` when a door does not attach on the outer
    /// face, in which case callers must skip window-based pruning.
    pub fn doors_cyclic(&self, r: u32) -> Option<Vec<u32>> {
        let node = &self.regions[r as usize];
        if node.bridges.is_empty() {
            return Some(Vec::new());
        }
        // Stub directions per attachment vertex.
        let mut stubs: HashMap<(u32, usize), u32> = HashMap::new();
        for &b in &node.bridges {
            let e = self.bridges[b as usize].edge;
            let (ga, gb) = self.region.edge_endpoints(e);
            let (inside, outside) = if self.vertex_region[ga as usize] == r {
                (ga, gb)
            } else {
                debug_assert_eq!(self.vertex_region[gb as usize], r);
                (gb, ga)
            };
            let (ix, iy) = self.region.vertex(inside);
            let (ox, oy) = self.region.vertex(outside);
            let dir = if ox > ix {
                EAST
            } else if ox < ix {
                WEST
            } else if oy > iy {
                NORTH
            } else {
                SOUTH
            };
            stubs.insert((inside, dir), b);
        }

        if node.verts.len() == 1 {
            let v = node.verts[0];
            let order: Vec<u32> = (0..4).filter_map(|d| stubs.get(&(v, d)).copied()).collect();
            debug_assert_eq!(order.len(), node.bridges.len());
            return Some(order);
        }

        // Local embedded subgraph of intact edges.
        let verts = &node.verts;
        let mut lid: HashMap<u32, u32> = HashMap::with_capacity(verts.len());
        for (i, &v) in verts.iter().enumerate() {
            lid.insert(v, i as u32);
        }
        let mut edge_at: Vec<[u32; 4]> = vec![[UNSET; 4]; verts.len()];
        let mut ledges: Vec<(u32, u32)> = Vec::new(); // local endpoints, lesser dir first
        for (i, &v) in verts.iter().enumerate() {
            for dir in [EAST, NORTH] {
                let Some(e) = self.region.edge_from(v, dir) else {
                    continue;
                };
                if self.edge_state[e as usize] != EdgeState::Intact {
                    continue;
                }
                let u = self.region.neighbor(v, dir).unwrap();
                let j = lid[&u];
                let le = ledges.len() as u32;
                ledges.push((i as u32, j));
                edge_at[i][dir] = le;
                edge_at[j as usize][opposite(dir)] = le;
            }
        }

        // Trace faces; identify the outer one by negative signed area.
        let m = ledges.len();
        let mut side_of = vec![UNSET; 2 * m];
        let mut outer_walk: Option<Vec<usize>> = None;
        let pos = |l: u32| self.region.vertex(verts[l as usize]);
        let de_info = |de: usize| -> (u32, u32, usize) {
            let (a, b) = ledges[de / 2];
            let (from, to) = if de % 2 == 0 { (a, b) } else { (b, a) };
            let (fx, fy) = pos(from);
            let (tx, ty) = pos(to);
            let dir = if tx > fx {
                EAST
            } else if tx < fx {
                WEST
            } else if ty > fy {
                NORTH
            } else {
                SOUTH
            };
            (from, to, dir)
        };
        for start in 0..2 * m {
            if side_of[start] != UNSET {
                continue;
            }
            let id = start as u32;
            let mut walk = Vec::new();
            let mut area2: i64 = 0;
            let mut de = start;
            loop {
                side_of[de] = id;
                walk.push(de);
                let (from, to, dir) = de_info(de);
                let (fx, fy) = pos(from);
                let (tx, ty) = pos(to);
                area2 += fx as i64 * ty as i64 - tx as i64 * fy as i64;
                let back = opposite(dir);
                let mut next_de = usize::MAX;
                for k in 1..=4 {
                    let d = (back + 4 - k) & 3;
                    let le = edge_at[to as usize][d];
                    if le != UNSET {
                        let o = usize::from(d == WEST || d == SOUTH);
                        next_de = 2 * le as usize + o;
                        break;
                    }
                }
                de = next_de;
                if de == start {
                    break;
                }
            }
            if area2 < 0 {
                debug_assert!(outer_walk.is_none());
                outer_walk = Some(walk);
            }
        }
        let outer_walk = outer_walk?;

        // Re-walk the outer face, sweeping each corner for stub directions.
        let mut order = Vec::with_capacity(node.bridges.len());
        let wl = outer_walk.len();
        for i in 0..wl {
            let (_, to, dir) = de_info(outer_walk[i]);
            let (_, _, out_dir) = de_info(outer_walk[(i + 1) % wl]);
            let gv = verts[to as usize];
            let back = opposite(dir);
            for k in 1..=4 {
                let d = (back + 4 - k) & 3;
                if d == out_dir {
                    break;
                }
                debug_assert_eq!(edge_at[to as usize][d], UNSET);
                if let Some(&b) = stubs.get(&(gv, d)) {
                    order.push(b);
                }
            }
        }
        if order.len() != node.bridges.len() {
            // Some door attaches on an interior face; no single cyclic
            // order exists.
            return None;
        }
        Some(order)
    }

    pub fn debug_dump(&self) -> serde_json::Value {
        let regions: Vec<_> = self
            .alive_regions()
            .into_iter()
            .map(|r| {
                let node = &self.regions[r as usize];
                json!({
                    "id": r,
                    "weight": node.weight,
                    "size": node.verts.len(),
                    "atomic": node.verts.len() == 1,
                    "bridges": node.bridges,
                })
            })
            .collect();
        let bridges: Vec<_> = (0..self.bridges.len() as u32)
            .map(|b| {
                let info = self.bridges[b as usize];
                let (a, bb) = self.region.edge_endpoints(info.edge);
                json!({
                    "id": b,
                    "edge": [self.region.vertex(a), self.region.vertex(bb)],
                    "regions": [info.regions.0, info.regions.1],
                })
            })
            .collect();
        json!({ "regions": regions, "bridges": bridges })
    }

    /// Structural self-checks, intended for tests and debugging.
    pub fn check_invariants(&self) {
        let mut weight = 0u64;
        let mut verts_seen = 0usize;
        for r in self.alive_regions() {
            let node = &self.regions[r as usize];
            weight += node.weight;
            verts_seen += node.verts.len();
            assert_eq!(node.weight, node.verts.iter().map(|&v| self.region.weight(v)).sum::<u64>());
            for (i, &v) in node.verts.iter().enumerate() {
                assert_eq!(self.vertex_region[v as usize], r);
                assert_eq!(self.vert_pos[v as usize], i as u32);
            }
            for (i, &b) in node.bridges.iter().enumerate() {
                let (ra, rb) = self.bridges[b as usize].regions;
                assert!(ra == r || rb == r);
                assert_ne!(ra, rb);
                assert!(self.regions[ra as usize].alive && self.regions[rb as usize].alive);
                let slot = usize::from(rb == r);
                assert_eq!(self.bridge_pos[b as usize][slot], i as u32);
            }
        }
        assert_eq!(weight, self.total_weight());
        assert_eq!(verts_seen, self.region.vertex_count());
        assert_eq!(self.bridges.len(), self.alive_count - 1, "block tree shape");
        for e in 0..self.region.edge_count() as u32 {
            let (a, b) = self.region.edge_endpoints(e);
            match self.edge_state[e as usize] {
                EdgeState::Intact => {
                    assert_eq!(
                        self.vertex_region[a as usize],
                        self.vertex_region[b as usize]
                    );
                }
                EdgeState::Bridge(bid) => {
                    let info = self.bridges[bid as usize];
                    assert_eq!(info.edge, e);
                    assert_eq!(info.regions.0, self.vertex_region[a as usize]);
                    assert_eq!(info.regions.1, self.vertex_region[b as usize]);
                }
                EdgeState::Deleted => {}
            }
        }
    }
}

/// One component search during a block split: the vertices it has claimed
/// and the frontier still to expand. `parent` links merged searches into
/// whichever absorbed them.
struct SplitSearch {
    frontier: Vec<u32>,
    claims: Vec<u32>,
    parent: u32,
    running: bool,
}

fn search_root(searches: &mut [SplitSearch], mut x: u32) -> u32 {
    while searches[x as usize].parent != x {
        let p = searches[x as usize].parent;
        searches[x as usize].parent = searches[p as usize].parent;
        x = searches[x as usize].parent;
    }
    x
}

/// Bridge flags per local edge, iterative lowpoint computation. Parallel
/// edges are respected by excluding only the exact incoming edge id.
fn local_bridges(n: usize, adj: &[Vec<(u32, u32)>]) -> Vec<bool> {
    let m: usize = adj.iter().map(|a| a.len()).sum::<usize>() / 2;
    let mut flags = vec![false; m];
    if n == 0 {
        return flags;
    }
    let mut disc = vec![UNSET; n];
    let mut low = vec![UNSET; n];
    let mut timer = 1u32;
    // Frames: (vertex, incoming edge id, adjacency cursor).
    let mut frames: Vec<(u32, u32, usize)> = vec![(0, UNSET, 0)];
    disc[0] = 0;
    low[0] = 0;
    while let Some(&(v, in_edge, idx)) = frames.last() {
        if idx < adj[v as usize].len() {
            frames.last_mut().unwrap().2 += 1;
            let (u, e) = adj[v as usize][idx];
            if disc[u as usize] == UNSET {
                disc[u as usize] = timer;
                low[u as usize] = timer;
                timer += 1;
                frames.push((u, e, 0));
            } else if e != in_edge {
                low[v as usize] = low[v as usize].min(disc[u as usize]);
            }
        } else {
            frames.pop();
            if let Some(&(p, _, _)) = frames.last() {
                low[p as usize] = low[p as usize].min(low[v as usize]);
                if low[v as usize] > disc[p as usize] {
                    flags[in_edge as usize] = true;
                }
            }
        }
    }
    debug_assert!(
        disc.iter().all(|&d| d != UNSET),
        "block subgraph must be connected"
    );
    flags
}

/// Whether some cyclically contiguous run of doors (including the empty
/// and the full run) has total hanging weight compatible with a
/// near-balanced cut through the block itself: the run's weight S must
/// satisfy W/2 - q - (wA - 1) <= S <= W/2 + q - 1, using that each side of
/// an in-block cut keeps at least one block vertex. This is a necessary
/// condition only; planarity forces the doors on one side of any in-block
/// tree edge to be cyclically contiguous.
pub fn contiguous_door_window_exists(doors: &[u64], w_block: u64, w_total: u64, q: u64) -> bool {
    debug_assert!(w_block >= 1);
    debug_assert_eq!(doors.iter().sum::<u64>() + w_block, w_total);
    // Work with doubled values to dodge halves: 2S in [lo2, hi2].
    let lo2 = (w_total + 2).saturating_sub(2 * q + 2 * w_block);
    let hi2 = w_total + 2 * q - 2;
    if hi2 < lo2 {
        return false;
    }
    if 0 >= lo2 {
        return true; // empty run qualifies
    }
    let k = doors.len();
    if k == 0 {
        return false;
    }
    // Two pointers over the doubled array: for each left end, the shortest
    // run reaching lo2 is the only candidate worth checking.
    let mut sum = 0u64;
    let mut right = 0usize;
    for left in 0..k {
        while 2 * sum < lo2 && right < left + k {
            sum += doors[right % k];
            right += 1;
        }
        if 2 * sum >= lo2 && 2 * sum <= hi2 {
            return true;
        }
        if right > left {
            sum -= doors[left % k];
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Coord;
    use crate::region::{build_grid_region, grid_block};
    use crate::rng::WalkRng;
    use crate::walks::DualForestState;

    fn path_region(len: i32) -> PlanarRegion {
        let verts: Vec<Coord> = (0..len).map(|x| (x, 0)).collect();
        build_grid_region(&verts, None).unwrap()
    }

    #[test]
    fn path_decomposes_into_atoms() {
        let r = path_region(4);
        let tree = RegionTree::new(&r);
        tree.check_invariants();
        assert_eq!(tree.alive_count(), 4);
        assert_eq!(tree.bridge_count(), 3);
        assert!(tree.alive_regions().iter().all(|&x| tree.is_atomic(x)));
        // Middle edge splits 2|2.
        match tree.find_center() {
            Center::Edge(b) => {
                let e = tree.bridge(b).edge;
                let (a, bb) = r.edge_endpoints(e);
                let xs = [r.vertex(a).0, r.vertex(bb).0];
                assert_eq!(xs, [1, 2]);
            }
            c => panic!("expected edge center, got {c:?}"),
        }
    }

    #[test]
    fn block_region_is_single_node() {
        let r = grid_block(3, 3);
        let tree = RegionTree::new(&r);
        tree.check_invariants();
        assert_eq!(tree.alive_count(), 1);
        assert_eq!(tree.bridge_count(), 0);
        assert!(matches!(tree.find_center(), Center::Region(_)));
    }

    #[test]
    fn weighted_path_vertex_center() {
        let verts: Vec<Coord> = (0..5).map(|x| (x, 0)).collect();
        let mut w = HashMap::new();
        w.insert((2, 0), 6u64);
        let r = build_grid_region(&verts, Some(&w)).unwrap();
        let tree = RegionTree::new(&r);
        match tree.find_center() {
            Center::Region(c) => {
                assert!(tree.is_atomic(c));
                assert_eq!(r.vertex(tree.region_verts(c)[0]), (2, 0));
            }
            c => panic!("expected the heavy vertex as center, got {c:?}"),
        }
    }

    /// Naive bridge oracle: an edge is a bridge iff removing it disconnects
    /// the survivors.
    fn naive_bridges(r: &PlanarRegion, deleted: &[bool]) -> Vec<bool> {
        let n = r.vertex_count();
        let m = r.edge_count();
        let mut out = vec![false; m];
        for e in 0..m {
            if deleted[e] {
                continue;
            }
            let mut dsu = DisjointSets::new(n);
            for e2 in 0..m {
                if e2 != e && !deleted[e2] {
                    let (a, b) = r.edge_endpoints(e2 as u32);
                    dsu.union(a, b);
                }
            }
            let (a, b) = r.edge_endpoints(e as u32);
            out[e] = !dsu.same(a, b);
        }
        out
    }

    #[test]
    fn repro_minimal() {
        let verts: Vec<Coord> = vec![
            (2, 2), (2, 3), (3, 3), (4, 3), (4, 2), (4, 4), (1, 3), (3, 4),
            (1, 2), (1, 1), (3, 2), (3, 1), (2, 4), (3, 0), (2, 1), (1, 4),
        ];
        let r = build_grid_region(&verts, None).unwrap();
        for e in 0..r.edge_count() as u32 {
            let (a, b) = r.edge_endpoints(e);
            eprintln!("edge {e}: {:?} - {:?}", r.vertex(a), r.vertex(b));
        }
        let mut tree = RegionTree::new(&r);
        eprintln!("initial: {}", tree.debug_dump());
        tree.apply_deletions(&[2, 10, 11, 13], &[1, 0, 3]);
        eprintln!("after: {}", tree.debug_dump());
        tree.check_invariants();
    }

    #[test]
    fn fuzz_irregular_shapes_against_naive() {
        use rand::Rng;
        let mut shape_rng = WalkRng::new(7777, 0);
        for round in 0..60 {
            // Random connected polyomino of vertices in a 5x5 box.
            let mut verts: Vec<Coord> = vec![(2, 2)];
            let mut have: std::collections::HashSet<Coord> = verts.iter().copied().collect();
            let target = shape_rng.random_range(6..20usize);
            while verts.len() < target {
                let &(x, y) = &verts[shape_rng.random_range(0..verts.len())];
                let (dx, dy) = [(1, 0), (-1, 0), (0, 1), (0, -1)][shape_rng.random_range(0..4)];
                let c = (x + dx, y + dy);
                if (0..5).contains(&c.0) && (0..5).contains(&c.1) && have.insert(c) {
                    verts.push(c);
                }
            }
            let Ok(r) = build_grid_region(&verts, None) else { continue };
            if !r.is_simply_connected() {
                continue;
            }
            for seed in 0..5 {
                eprintln!("RUN round={round} seed={seed} verts={verts:?}");
                let mut rng = WalkRng::new(round * 100 + seed, 1);
                let mut state = DualForestState::new(&r);
                let mut tree = RegionTree::new(&r);
                let mut deleted = vec![false; r.edge_count()];
                let t = 1 + (seed as u64 % 3) * 6;
                while !state.is_complete() {
                    let s = r.cell(state.fresh_cells()[0]);
                    let report = state.run_stage(s, t, &mut rng);
                    for &e in &report.deleted_edges {
                        deleted[e as usize] = true;
                    }
                    tree.apply_deletions(&report.deleted_edges, &report.new_bridges);
                    tree.check_invariants();
                    let naive = naive_bridges(&r, &deleted);
                    for e in 0..r.edge_count() as u32 {
                        let is_bridge = matches!(tree.edge_state(e), EdgeState::Bridge(_));
                        assert_eq!(
                            is_bridge, naive[e as usize],
                            "edge {e} verts={verts:?} round={round} seed={seed}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn incremental_matches_naive_through_forest_growth() {
        let r = grid_block(6, 5);
        let mut rng = WalkRng::new(42, 0);
        let mut state = DualForestState::new(&r);
        let mut tree = RegionTree::new(&r);
        let mut deleted = vec![false; r.edge_count()];
        while !state.is_complete() {
            let s = r.cell(state.fresh_cells()[0]);
            let report = state.run_stage(s, 12, &mut rng);
            for &e in &report.deleted_edges {
                deleted[e as usize] = true;
            }
            tree.apply_deletions(&report.deleted_edges, &report.new_bridges);
            tree.check_invariants();
            let naive = naive_bridges(&r, &deleted);
            for e in 0..r.edge_count() as u32 {
                let is_bridge = matches!(tree.edge_state(e), EdgeState::Bridge(_));
                assert_eq!(is_bridge, naive[e as usize], "edge {e}");
            }
        }
        // Forest complete: survivors form a spanning tree, all atoms.
        assert_eq!(tree.alive_count(), r.vertex_count());
        assert_eq!(tree.bridge_count(), r.vertex_count() - 1);
    }

    /// A 2x2 block with unit-weight path arms grafted onto distinct
    /// boundary vertices; lengths given per attachment.
    fn block_with_arms(arms: &[(Coord, i32, i32, i32)]) -> PlanarRegion {
        // (start just outside the block, dx, dy, len)
        let mut verts = vec![(0, 0), (1, 0), (0, 1), (1, 1)];
        for &((sx, sy), dx, dy, len) in arms {
            for i in 0..len {
                verts.push((sx + i * dx, sy + i * dy));
            }
        }
        build_grid_region(&verts, None).unwrap()
    }

    #[test]
    fn doors_come_out_in_boundary_order() {
        // East arm at (1,0), west arm at (0,0), north arm at (1,1).
        let r = block_with_arms(&[
            ((2, 0), 1, 0, 2),
            ((-1, 0), -1, 0, 2),
            ((1, 2), 0, 1, 2),
        ]);
        let tree = RegionTree::new(&r);
        let block = tree.region_of(r.vertex_id((0, 0)).unwrap());
        assert!(!tree.is_atomic(block));
        let doors = tree.doors_cyclic(block).unwrap();
        assert_eq!(doors.len(), 3);
        // Map each door to its direction of departure from the block.
        let dir_of = |b: u32| {
            let e = tree.bridge(b).edge;
            let (a, bb) = r.edge_endpoints(e);
            let (out, inside): (Coord, Coord) = if tree.region_of(a) == block {
                (r.vertex(bb), r.vertex(a))
            } else {
                (r.vertex(a), r.vertex(bb))
            };
            (out.0 - inside.0, out.1 - inside.1)
        };
        let dirs: Vec<(i32, i32)> = doors.iter().map(|&b| dir_of(b)).collect();
        // Clockwise boundary order: east, west, north (up to rotation).
        let expect = [(1, 0), (-1, 0), (0, 1)];
        let start = dirs.iter().position(|&d| d == expect[0]).unwrap();
        for i in 0..3 {
            assert_eq!(dirs[(start + i) % 3], expect[i]);
        }
    }

    #[test]
    fn hanging_weights_match_arms() {
        let r = block_with_arms(&[
            ((2, 0), 1, 0, 5),
            ((-1, 0), -1, 0, 1),
            ((1, 2), 0, 1, 3),
        ]);
        let tree = RegionTree::new(&r);
        let block = tree.region_of(r.vertex_id((0, 0)).unwrap());
        let mut weights: Vec<u64> = tree
            .hanging_weights(block)
            .into_iter()
            .map(|(_, w)| w)
            .collect();
        weights.sort_unstable();
        assert_eq!(weights, vec![1, 3, 5]);
    }

    #[test]
    fn window_check_pure_cases() {
        // Three arms of four: total 16, every run misses [5, 7].
        assert!(!contiguous_door_window_exists(&[4, 4, 4], 4, 16, 0));
        // Alternating 5,1: the single door of weight 5 is in range.
        assert!(contiguous_door_window_exists(&[5, 1, 5, 1], 4, 16, 0));
        // Block at least half the total: the empty run qualifies.
        assert!(contiguous_door_window_exists(&[1, 1], 8, 10, 0));
        // Doorless block splitting itself.
        assert!(contiguous_door_window_exists(&[], 6, 6, 0));
        // An atomic block has no internal edge to cut.
        assert!(!contiguous_door_window_exists(&[2, 2], 1, 5, 0));
        // Relaxation widens the window.
        assert!(contiguous_door_window_exists(&[4, 4, 4], 4, 16, 1));
    }

    #[test]
    fn window_check_agrees_with_exhaustive() {
        let mut rng = WalkRng::new(99, 0);
        use rand::Rng;
        for _ in 0..500 {
            let k = rng.random_range(1..6usize);
            let doors: Vec<u64> = (0..k).map(|_| rng.random_range(1..9u64)).collect();
            let w_block = rng.random_range(1..9u64);
            let w_total = doors.iter().sum::<u64>() + w_block;
            let q = rng.random_range(0..2u64);
            let fast = contiguous_door_window_exists(&doors, w_block, w_total, q);
            let mut slow = false;
            'outer: for start in 0..k {
                for len in 0..=k {
                    let s: u64 = (0..len).map(|i| doors[(start + i) % k]).sum();
                    let lo2 = (w_total + 2).saturating_sub(2 * q + 2 * w_block);
                    if 2 * s >= lo2 && 2 * s + 2 <= w_total + 2 * q {
                        slow = true;
                        break 'outer;
                    }
                }
            }
            assert_eq!(fast, slow, "doors={doors:?} wA={w_block} q={q}");
        }
    }

    #[test]
    fn three_arm_trap_has_no_balanced_cut() {
        // 2x2 block, three arms of four: the block is the center, and no
        // contiguous door run allows an in-block balance edge.
        let r = block_with_arms(&[
            ((2, 0), 1, 0, 4),
            ((-1, 0), -1, 0, 4),
            ((1, 2), 0, 1, 4),
        ]);
        assert_eq!(r.total_weight(), 16);
        let tree = RegionTree::new(&r);
        let block = tree.region_of(r.vertex_id((0, 0)).unwrap());
        assert_eq!(tree.find_center(), Center::Region(block));
        let doors = tree.doors_cyclic(block).unwrap();
        let by_door: HashMap<u32, u64> = tree.hanging_weights(block).into_iter().collect();
        let weights: Vec<u64> = doors.iter().map(|&b| by_door[&b]).collect();
        assert!(!contiguous_door_window_exists(
            &weights,
            tree.region_weight(block),
            r.total_weight(),
            0
        ));
        // The oracle agrees: no balanced 2-partition exists at all.
        let parts = crate::oracle::balanced_2partitions(&r, 0).unwrap();
        assert!(parts.is_empty());
    }

    #[test]
    fn sides_of_bridge_partition_everything() {
        let r = block_with_arms(&[((2, 0), 1, 0, 3)]);
        let tree = RegionTree::new(&r);
        for b in 0..tree.bridge_count() as u32 {
            let (sa, sb) = tree.sides_of_bridge(b);
            assert_eq!(sa.len() + sb.len(), r.vertex_count());
            let mut all: Vec<u32> = sa.iter().chain(sb.iter()).copied().collect();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), r.vertex_count());
        }
    }

    #[test]
    fn near_balance_queries() {
        let r = path_region(6);
        let tree = RegionTree::new(&r);
        // Splits along the path: 1|5 .. 5|1. Exactly balanced: 3|3.
        assert_eq!(tree.near_balanced_bridges(0).len(), 1);
        // q=1 admits 2|4, 3|3, 4|2.
        assert_eq!(tree.near_balanced_bridges(1).len(), 3);
        // Near-centers for q=0 on an even path: the two middle atoms.
        assert_eq!(tree.near_center_regions(0).len(), 2);
    }
}
