//! Regions of the square lattice: induced subgraphs with vertex weights.
//!
//! A region owns dense ids for its vertices, edges and internal faces
//! (unit cells whose four corners all belong to the region), plus the
//! derived structure the samplers need: the wired dual, traced embedded
//! faces with nesting depths, and simple-connectivity checks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::MultiGraph;
use crate::lattice::{opposite, step, Coord, Lattice, Z2, EAST, NORTH, SOUTH, WEST};

pub const UNSET: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegionError {
    #[error("region has no vertices")]
    EmptyInput,
    #[error("vertex set is not connected")]
    DisconnectedInput,
    #[error("region is not simply connected")]
    NotSimplyConnected,
    #[error("weight for {0:?} must be a positive integer")]
    BadWeight(Coord),
    #[error("weight given for {0:?}, which is not a region vertex")]
    WeightForMissingVertex(Coord),
    #[error("unsupported lattice {0:?}")]
    UnsupportedLattice(String),
    #[error("malformed region file: {0}")]
    BadFormat(String),
    #[error("duplicate vertex {0:?}")]
    DuplicateVertex(Coord),
}

/// One side of a dual edge: an internal face by id, or a lattice cell
/// outside the region (a wired external vertex).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DualSide {
    Internal(u32),
    External(Coord),
}

impl DualSide {
    pub fn is_external(self) -> bool {
        matches!(self, DualSide::External(_))
    }
}

#[derive(Clone, Debug)]
pub struct PlanarRegion {
    verts: Vec<Coord>,
    vert_index: HashMap<Coord, u32>,
    weights: Vec<u64>,
    total_weight: u64,
    /// Neighbor vertex id per rotation direction, `UNSET` when absent.
    adj: Vec<[u32; 4]>,
    /// Edge id per rotation direction, `UNSET` when absent.
    edge_at: Vec<[u32; 4]>,
    /// Endpoint pairs, lesser id first; order is deterministic in the input.
    edges: Vec<(u32, u32)>,
    cells: Vec<Coord>,
    cell_index: HashMap<Coord, u32>,
    simply_connected: bool,
    bbox: (i32, i32, i32, i32),
}

/// Builds the induced subgraph of Z2 on `verts`. Weights default to 1.
/// Rejects empty, duplicated or disconnected input; a region with holes is
/// representable (the face machinery handles it), only the samplers insist
/// on simple connectivity.
pub fn build_grid_region(
    verts: &[Coord],
    weights: Option<&HashMap<Coord, u64>>,
) -> Result<PlanarRegion, RegionError> {
    if verts.is_empty() {
        return Err(RegionError::EmptyInput);
    }
    let mut sorted: Vec<Coord> = verts.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(RegionError::DuplicateVertex(w[0]));
        }
    }
    let mut vert_index = HashMap::with_capacity(sorted.len());
    for (i, &v) in sorted.iter().enumerate() {
        vert_index.insert(v, i as u32);
    }

    let mut region_weights = vec![1u64; sorted.len()];
    if let Some(map) = weights {
        for (&v, &w) in map {
            let id = *vert_index
                .get(&v)
                .ok_or(RegionError::WeightForMissingVertex(v))?;
            if w == 0 {
                return Err(RegionError::BadWeight(v));
            }
            region_weights[id as usize] = w;
        }
    }
    let total_weight = region_weights.iter().sum();

    let n = sorted.len();
    let mut adj = vec![[UNSET; 4]; n];
    let mut edge_at = vec![[UNSET; 4]; n];
    let mut edges = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        for dir in 0..4 {
            if let Some(&j) = vert_index.get(&step(v, dir)) {
                adj[i][dir] = j;
            }
        }
    }
    // East then north from each vertex in id order: a stable edge numbering.
    for i in 0..n {
        for dir in [EAST, NORTH] {
            let j = adj[i][dir];
            if j != UNSET {
                let e = edges.len() as u32;
                edges.push((i as u32, j));
                edge_at[i][dir] = e;
                edge_at[j as usize][opposite(dir)] = e;
            }
        }
    }

    // Connectivity.
    let mut seen = vec![false; n];
    let mut stack = vec![0u32];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for dir in 0..4 {
            let u = adj[v as usize][dir];
            if u != UNSET && !seen[u as usize] {
                seen[u as usize] = true;
                count += 1;
                stack.push(u);
            }
        }
    }
    if count != n {
        return Err(RegionError::DisconnectedInput);
    }

    // Internal faces: cells with all four corners present.
    let mut cells = Vec::new();
    for &(x, y) in &sorted {
        let corners = [(x + 1, y), (x, y + 1), (x + 1, y + 1)];
        if corners.iter().all(|c| vert_index.contains_key(c)) {
            cells.push((x, y));
        }
    }
    let mut cell_index = HashMap::with_capacity(cells.len());
    for (i, &c) in cells.iter().enumerate() {
        cell_index.insert(c, i as u32);
    }

    let xs: Vec<i32> = sorted.iter().map(|v| v.0).collect();
    let ys: Vec<i32> = sorted.iter().map(|v| v.1).collect();
    let bbox = (
        *xs.iter().min().unwrap(),
        *ys.iter().min().unwrap(),
        *xs.iter().max().unwrap(),
        *ys.iter().max().unwrap(),
    );

    let mut region = PlanarRegion {
        verts: sorted,
        vert_index,
        weights: region_weights,
        total_weight,
        adj,
        edge_at,
        edges,
        cells,
        cell_index,
        simply_connected: false,
        bbox,
    };
    region.simply_connected = boundary_faces_connected(&region);
    Ok(region)
}

/// A w-by-h block of vertices at the origin, unit weights.
pub fn grid_block(w: i32, h: i32) -> PlanarRegion {
    assert!(w >= 1 && h >= 1);
    let mut verts = Vec::with_capacity((w * h) as usize);
    for x in 0..w {
        for y in 0..h {
            verts.push((x, y));
        }
    }
    build_grid_region(&verts, None).unwrap()
}

impl PlanarRegion {
    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[Coord] {
        &self.verts
    }

    pub fn vertex(&self, id: u32) -> Coord {
        self.verts[id as usize]
    }

    pub fn vertex_id(&self, c: Coord) -> Option<u32> {
        self.vert_index.get(&c).copied()
    }

    pub fn weight(&self, id: u32) -> u64 {
        self.weights[id as usize]
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn neighbor(&self, v: u32, dir: usize) -> Option<u32> {
        let u = self.adj[v as usize][dir];
        (u != UNSET).then_some(u)
    }

    pub fn edge_from(&self, v: u32, dir: usize) -> Option<u32> {
        let e = self.edge_at[v as usize][dir];
        (e != UNSET).then_some(e)
    }

    pub fn edge_endpoints(&self, e: u32) -> (u32, u32) {
        self.edges[e as usize]
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn cells(&self) -> &[Coord] {
        &self.cells
    }

    pub fn cell(&self, id: u32) -> Coord {
        self.cells[id as usize]
    }

    pub fn cell_id(&self, c: Coord) -> Option<u32> {
        self.cell_index.get(&c).copied()
    }

    pub fn is_internal_cell(&self, c: Coord) -> bool {
        self.cell_index.contains_key(&c)
    }

    pub fn bbox(&self) -> (i32, i32, i32, i32) {
        self.bbox
    }

    /// Result of the linear-time boundary-face connectivity check, fixed at
    /// build time.
    pub fn is_simply_connected(&self) -> bool {
        self.simply_connected
    }

    /// True when the edge is horizontal (endpoints differ in x).
    pub fn edge_is_horizontal(&self, e: u32) -> bool {
        let (a, b) = self.edges[e as usize];
        self.verts[a as usize].1 == self.verts[b as usize].1
    }

    /// The primal edge crossed when stepping from cell `c` in `dir`, if it
    /// belongs to the region.
    pub fn crossed_edge(&self, c: Coord, dir: usize) -> Option<u32> {
        let (x, y) = c;
        let (v, d) = match dir {
            EAST => ((x + 1, y), NORTH),
            NORTH => ((x, y + 1), EAST),
            WEST => ((x, y), NORTH),
            SOUTH => ((x, y), EAST),
            _ => unreachable!(),
        };
        let id = self.vertex_id(v)?;
        self.edge_from(id, d)
    }

    /// The two lattice cells flanking a primal edge, as dual sides.
    pub fn edge_sides(&self, e: u32) -> (DualSide, DualSide) {
        let (a, _) = self.edges[e as usize];
        let (x, y) = self.verts[a as usize];
        let (c1, c2) = if self.edge_is_horizontal(e) {
            ((x, y), (x, y - 1))
        } else {
            ((x, y), (x - 1, y))
        };
        (self.dual_side(c1), self.dual_side(c2))
    }

    pub fn dual_side(&self, c: Coord) -> DualSide {
        match self.cell_id(c) {
            Some(id) => DualSide::Internal(id),
            None => DualSide::External(c),
        }
    }

    /// Degree of a vertex in the region.
    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].iter().filter(|&&u| u != UNSET).count()
    }

    /// Euler-characteristic route to simple connectivity: a connected
    /// region is hole-free exactly when v - e + f = 1 over internal faces.
    pub fn euler_simply_connected(&self) -> bool {
        self.verts.len() as i64 - self.edges.len() as i64 + self.cells.len() as i64 == 1
    }
}

/// Boundary faces are lattice cells with some but not all corners in the
/// region. The region is simply connected exactly when they form one
/// component under dual steps that do not cross region edges: a hole's
/// boundary cells cannot reach the outside without crossing a wall.
fn boundary_faces_connected(region: &PlanarRegion) -> bool {
    let mut boundary: HashMap<Coord, bool> = HashMap::new();
    for &(x, y) in &region.verts {
        for cell in [(x, y), (x - 1, y), (x, y - 1), (x - 1, y - 1)] {
            if boundary.contains_key(&cell) {
                continue;
            }
            let corners = [
                cell,
                (cell.0 + 1, cell.1),
                (cell.0, cell.1 + 1),
                (cell.0 + 1, cell.1 + 1),
            ];
            let inside = corners
                .iter()
                .filter(|c| region.vert_index.contains_key(c))
                .count();
            if inside >= 1 && inside < 4 {
                boundary.insert(cell, false);
            }
        }
    }
    if boundary.is_empty() {
        // A region with no boundary cells has no vertices; unreachable here.
        return true;
    }
    let start = *boundary.keys().min().unwrap();
    let mut stack = vec![start];
    *boundary.get_mut(&start).unwrap() = true;
    let mut visited = 1usize;
    while let Some(c) = stack.pop() {
        for dir in 0..4 {
            let g = step(c, dir);
            let (a, b) = Z2.crossing_edge(c, dir);
            let wall =
                region.vert_index.contains_key(&a) && region.vert_index.contains_key(&b);
            if wall {
                continue;
            }
            if let Some(seen) = boundary.get_mut(&g) {
                if !*seen {
                    *seen = true;
                    visited += 1;
                    stack.push(g);
                }
            }
        }
    }
    visited == boundary.len()
}

// ---------------------------------------------------------------------------
// Embedded faces and nesting depth.

#[derive(Clone, Debug)]
pub struct FaceInfo {
    /// Vertex ids along the boundary walk (each directed edge once).
    pub walk: Vec<u32>,
    /// Twice the signed area of the walk; negative exactly for the outer face.
    pub area2: i64,
    pub outer: bool,
    /// Number of faces that fully enclose this one, plus one for bounded
    /// faces; the outer face has depth 0.
    pub depth: u32,
}

#[derive(Clone, Debug)]
pub struct FaceStructure {
    pub faces: Vec<FaceInfo>,
    pub outer: u32,
    /// Face id on the left of each directed edge (2e for lesser-to-greater
    /// endpoint order, 2e+1 for the reverse).
    pub side_of: Vec<u32>,
}

impl FaceStructure {
    /// Face id of an internal cell (every internal cell is a traced face).
    pub fn face_of_cell(&self, region: &PlanarRegion, cell: Coord) -> u32 {
        let v = region.vertex_id(cell).unwrap();
        let e = region.edge_from(v, EAST).unwrap();
        self.side_of[2 * e as usize]
    }

    pub fn depth_of_cell(&self, region: &PlanarRegion, cell: Coord) -> u32 {
        self.faces[self.face_of_cell(region, cell) as usize].depth
    }
}

/// Traces every face of the embedded region graph from the rotation system
/// and labels each with its nesting depth: the outer face has depth 0, and
/// a face reachable in the dual only through k enclosing faces has depth
/// k + 1. Enclosing faces are exactly the separating cut vertices of the
/// dual, so depths come from the dual's block-cut tree.
pub fn face_depths(region: &PlanarRegion) -> FaceStructure {
    let m = region.edge_count();
    let mut side_of = vec![UNSET; 2 * m];
    let mut faces: Vec<FaceInfo> = Vec::new();

    // Directed edge de = 2e+o; o=0 travels lesser->greater endpoint.
    let dir_of = |de: usize| -> (u32, u32, usize) {
        let e = (de / 2) as u32;
        let (a, b) = region.edge_endpoints(e);
        let (from, to) = if de % 2 == 0 { (a, b) } else { (b, a) };
        let (fx, fy) = region.vertex(from);
        let (tx, ty) = region.vertex(to);
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
        let id = faces.len() as u32;
        let mut walk = Vec::new();
        let mut area2: i64 = 0;
        let mut de = start;
        loop {
            side_of[de] = id;
            let (from, to, dir) = dir_of(de);
            walk.push(from);
            let (fx, fy) = region.vertex(from);
            let (tx, ty) = region.vertex(to);
            area2 += fx as i64 * ty as i64 - tx as i64 * fy as i64;
            // Continue clockwise-next from the reversed edge: this traces
            // bounded faces counterclockwise.
            let back = opposite(dir);
            let mut next_de = UNSET as usize;
            for k in 1..=4 {
                let d = (back + 4 - k) & 3;
                if let Some(e2) = region.edge_from(to, d) {
                    let o = if d == EAST || d == NORTH { 0 } else { 1 };
                    next_de = 2 * e2 as usize + o;
                    break;
                }
            }
            de = next_de;
            if de == start {
                break;
            }
        }
        faces.push(FaceInfo {
            walk,
            area2,
            outer: area2 < 0,
            depth: 0,
        });
    }

    let outer_candidates: Vec<u32> = faces
        .iter()
        .enumerate()
        .filter(|(_, f)| f.outer)
        .map(|(i, _)| i as u32)
        .collect();
    assert_eq!(outer_candidates.len(), 1, "exactly one outer face");
    let outer = outer_candidates[0];

    assign_depths(region, &mut faces, outer, &side_of);

    FaceStructure { faces, outer, side_of }
}

fn assign_depths(
    region: &PlanarRegion,
    faces: &mut [FaceInfo],
    outer: u32,
    side_of: &[u32],
) {
    let nf = faces.len();
    // Dual adjacency, parallel edges collapsed, self-loops dropped.
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); nf];
    for e in 0..region.edge_count() {
        let fa = side_of[2 * e];
        let fb = side_of[2 * e + 1];
        if fa != fb {
            if !adj[fa as usize].contains(&fb) {
                adj[fa as usize].push(fb);
                adj[fb as usize].push(fa);
            }
        }
    }

    if nf == 1 {
        faces[0].depth = 0;
        return;
    }

    // Block-cut decomposition of the dual (iterative Hopcroft-Tarjan).
    let mut disc = vec![UNSET; nf];
    let mut low = vec![UNSET; nf];
    let mut is_cut = vec![false; nf];
    let mut edge_stack: Vec<(u32, u32)> = Vec::new();
    let mut blocks: Vec<Vec<u32>> = Vec::new();
    let mut timer = 0u32;

    // Frames: (vertex, parent, next child index).
    let mut frames: Vec<(u32, u32, usize)> = vec![(outer, UNSET, 0)];
    disc[outer as usize] = timer;
    low[outer as usize] = timer;
    timer += 1;
    let mut root_children = 0u32;
    while !frames.is_empty() {
        let top = frames.len() - 1;
        let (v, parent, idx) = frames[top];
        if idx < adj[v as usize].len() {
            frames[top].2 += 1;
            let u = adj[v as usize][idx];
            if disc[u as usize] == UNSET {
                edge_stack.push((v, u));
                disc[u as usize] = timer;
                low[u as usize] = timer;
                timer += 1;
                if v == outer {
                    root_children += 1;
                }
                frames.push((u, v, 0));
            } else if u != parent && disc[u as usize] < disc[v as usize] {
                edge_stack.push((v, u));
                low[v as usize] = low[v as usize].min(disc[u as usize]);
            }
        } else {
            frames.pop();
            if let Some(&(p, _, _)) = frames.last() {
                low[p as usize] = low[p as usize].min(low[v as usize]);
                if low[v as usize] >= disc[p as usize] {
                    is_cut[p as usize] = true;
                    let mut members: Vec<u32> = Vec::new();
                    loop {
                        let (a, b) = edge_stack.pop().expect("block edge stack underflow");
                        members.push(a);
                        members.push(b);
                        if (a, b) == (p, v) {
                            break;
                        }
                    }
                    members.sort_unstable();
                    members.dedup();
                    blocks.push(members);
                }
            }
        }
    }
    // The DFS root is a cut vertex only with two or more DFS children.
    is_cut[outer as usize] = root_children > 1;

    // Block-cut tree: block nodes then cut nodes; BFS from the outer face's
    // node counting cut vertices strictly inside each root-to-node path.
    let cut_ids: Vec<u32> = (0..nf as u32).filter(|&f| is_cut[f as usize]).collect();
    let cut_node: HashMap<u32, usize> = cut_ids
        .iter()
        .enumerate()
        .map(|(i, &f)| (f, blocks.len() + i))
        .collect();
    let total_nodes = blocks.len() + cut_ids.len();
    let mut tree_adj: Vec<Vec<usize>> = vec![Vec::new(); total_nodes];
    let mut block_of_face: Vec<usize> = vec![usize::MAX; nf];
    for (bi, members) in blocks.iter().enumerate() {
        for &f in members {
            if let Some(&cn) = cut_node.get(&f) {
                tree_adj[bi].push(cn);
                tree_adj[cn].push(bi);
            } else {
                block_of_face[f as usize] = bi;
            }
        }
    }

    let root = if let Some(&cn) = cut_node.get(&outer) {
        cn
    } else {
        block_of_face[outer as usize]
    };
    let mut cuts_strict = vec![u32::MAX; total_nodes];
    let mut queue = std::collections::VecDeque::new();
    cuts_strict[root] = 0;
    queue.push_back(root);
    while let Some(p) = queue.pop_front() {
        for &c in &tree_adj[p] {
            if cuts_strict[c] == u32::MAX {
                let p_is_cut = p >= blocks.len();
                cuts_strict[c] = cuts_strict[p] + u32::from(p_is_cut && p != root);
                queue.push_back(c);
            }
        }
    }

    for f in 0..nf as u32 {
        if f == outer {
            faces[f as usize].depth = 0;
            continue;
        }
        let node = if let Some(&cn) = cut_node.get(&f) {
            cn
        } else {
            block_of_face[f as usize]
        };
        faces[f as usize].depth = cuts_strict[node] + 1;
    }
}

// ---------------------------------------------------------------------------
// Wired dual.

/// The wired dual of a region: internal faces keep their cell ids, and
/// every lattice cell outside the region that touches a region edge is its
/// own external vertex. One dual edge per region edge.
#[derive(Clone, Debug)]
pub struct WiredDual {
    pub internal: Vec<Coord>,
    pub external: Vec<Coord>,
    /// One entry per region edge.
    pub edges: Vec<(DualSide, DualSide)>,
    /// Nesting depth per internal face.
    pub face_depth: Vec<u32>,
}

pub fn wired_dual(region: &PlanarRegion) -> WiredDual {
    let mut external: Vec<Coord> = Vec::new();
    let mut edges = Vec::with_capacity(region.edge_count());
    for e in 0..region.edge_count() as u32 {
        let (a, b) = region.edge_sides(e);
        for side in [a, b] {
            if let DualSide::External(c) = side {
                external.push(c);
            }
        }
        edges.push((a, b));
    }
    external.sort_unstable();
    external.dedup();

    let structure = face_depths(region);
    let face_depth = region
        .cells()
        .iter()
        .map(|&c| structure.depth_of_cell(region, c))
        .collect();

    WiredDual {
        internal: region.cells().to_vec(),
        external,
        edges,
        face_depth,
    }
}

/// The contracted dual as a multigraph: one vertex per internal cell plus
/// a single outer vertex absorbing every external side, one edge per
/// region edge with aligned ids. The outer vertex is `cell_count()`.
pub fn contracted_dual_graph(region: &PlanarRegion) -> MultiGraph {
    let outer = region.cell_count() as u32;
    let mut g = MultiGraph::new(outer + 1);
    for e in 0..region.edge_count() as u32 {
        let (a, b) = region.edge_sides(e);
        let na = match a {
            DualSide::Internal(c) => c,
            DualSide::External(_) => outer,
        };
        let nb = match b {
            DualSide::Internal(c) => c,
            DualSide::External(_) => outer,
        };
        g.add_edge(na, nb);
    }
    g
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DualTreeError {
    #[error("edge set is not a spanning tree of the contracted dual")]
    NotSpanningTree,
}

/// Complements a spanning tree of the contracted dual (all external cells
/// identified) into the primal spanning tree it encodes: the primal edges
/// whose duals are NOT in the tree.
pub fn dual_tree_to_primal_tree(
    region: &PlanarRegion,
    dual_tree: &[u32],
) -> Result<Vec<u32>, DualTreeError> {
    let f = region.cell_count();
    if dual_tree.len() != f {
        return Err(DualTreeError::NotSpanningTree);
    }
    // Union-find over internal cells plus one node for the outer vertex.
    let mut parent: Vec<u32> = (0..f as u32 + 1).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let outer = f as u32;
    let mut in_tree = vec![false; region.edge_count()];
    for &e in dual_tree {
        if e as usize >= region.edge_count() || in_tree[e as usize] {
            return Err(DualTreeError::NotSpanningTree);
        }
        in_tree[e as usize] = true;
        let (a, b) = region.edge_sides(e);
        let na = match a {
            DualSide::Internal(c) => c,
            DualSide::External(_) => outer,
        };
        let nb = match b {
            DualSide::Internal(c) => c,
            DualSide::External(_) => outer,
        };
        let ra = find(&mut parent, na);
        let rb = find(&mut parent, nb);
        if ra == rb {
            return Err(DualTreeError::NotSpanningTree);
        }
        parent[ra as usize] = rb;
    }
    Ok((0..region.edge_count() as u32)
        .filter(|&e| !in_tree[e as usize])
        .collect())
}

// ---------------------------------------------------------------------------
// JSON region format.

#[derive(Serialize, Deserialize)]
struct RegionFile {
    lattice: String,
    cells: Vec<(i32, i32)>,
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    weights: HashMap<String, u64>,
}

/// Parses the on-disk region format and validates connectivity and simple
/// connectivity, reporting which check failed.
pub fn load_region_json(text: &str) -> Result<PlanarRegion, RegionError> {
    let file: RegionFile =
        serde_json::from_str(text).map_err(|e| RegionError::BadFormat(e.to_string()))?;
    if file.lattice != "Z2" {
        return Err(RegionError::UnsupportedLattice(file.lattice));
    }
    let mut weights = HashMap::new();
    for (key, w) in &file.weights {
        let coord = parse_coord_key(key)
            .ok_or_else(|| RegionError::BadFormat(format!("bad weight key {key:?}")))?;
        weights.insert(coord, *w);
    }
    let region = build_grid_region(&file.cells, Some(&weights))?;
    if !region.is_simply_connected() {
        return Err(RegionError::NotSimplyConnected);
    }
    Ok(region)
}

pub fn region_to_json(region: &PlanarRegion) -> String {
    let weights: HashMap<String, u64> = region
        .vertices()
        .iter()
        .enumerate()
        .filter(|(i, _)| region.weight(*i as u32) != 1)
        .map(|(i, &(x, y))| (format!("{x},{y}"), region.weight(i as u32)))
        .collect();
    let file = RegionFile {
        lattice: "Z2".to_string(),
        cells: region.vertices().to_vec(),
        weights,
    };
    serde_json::to_string(&file).unwrap()
}

fn parse_coord_key(key: &str) -> Option<Coord> {
    let (a, b) = key.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_counts() {
        let r = grid_block(3, 3);
        assert_eq!(r.vertex_count(), 9);
        assert_eq!(r.edge_count(), 12);
        assert_eq!(r.cell_count(), 4);
        assert!(r.is_simply_connected());
        assert!(r.euler_simply_connected());
    }

    #[test]
    fn path_region_has_no_cells() {
        let verts: Vec<Coord> = (0..4).map(|x| (x, 0)).collect();
        let r = build_grid_region(&verts, None).unwrap();
        assert_eq!(r.edge_count(), 3);
        assert_eq!(r.cell_count(), 0);
        assert!(r.is_simply_connected());
    }

    #[test]
    fn ring_is_not_simply_connected() {
        let verts: Vec<Coord> = (0..3)
            .flat_map(|x| (0..3).map(move |y| (x, y)))
            .filter(|&c| c != (1, 1))
            .collect();
        let r = build_grid_region(&verts, None).unwrap();
        assert!(!r.is_simply_connected());
        assert!(!r.euler_simply_connected());
    }

    #[test]
    fn disconnected_input_rejected() {
        let err = build_grid_region(&[(0, 0), (2, 0)], None).unwrap_err();
        assert_eq!(err, RegionError::DisconnectedInput);
    }

    #[test]
    fn pinched_blocks_are_simply_connected() {
        // Two 2x2 blocks sharing one corner vertex.
        let mut verts = vec![(0, 0), (1, 0), (0, 1), (1, 1)];
        verts.extend([(2, 1), (1, 2), (2, 2)]);
        let r = build_grid_region(&verts, None).unwrap();
        assert!(r.is_simply_connected());
        assert!(r.euler_simply_connected());
    }

    #[test]
    fn face_walks_cover_each_directed_edge_once() {
        let r = grid_block(3, 2);
        let fs = face_depths(&r);
        let total: usize = fs.faces.iter().map(|f| f.walk.len()).sum();
        assert_eq!(total, 2 * r.edge_count());
        assert_eq!(fs.faces.len(), r.cell_count() + 1);
    }

    #[test]
    fn block_depths_are_one() {
        let r = grid_block(4, 4);
        let fs = face_depths(&r);
        for (i, f) in fs.faces.iter().enumerate() {
            if i as u32 == fs.outer {
                assert_eq!(f.depth, 0);
            } else {
                assert_eq!(f.depth, 1);
            }
        }
    }

    #[test]
    fn wired_dual_of_3x3() {
        let r = grid_block(3, 3);
        let d = wired_dual(&r);
        assert_eq!(d.internal.len(), 4);
        // One external cell per perimeter edge; diagonal corner cells share
        // no edge with the region and are absent.
        assert_eq!(d.external.len(), 8);
        assert_eq!(d.edges.len(), 12);
        assert!(d.face_depth.iter().all(|&d| d == 1));
        let crossings = d
            .edges
            .iter()
            .filter(|(a, b)| a.is_external() || b.is_external())
            .count();
        assert_eq!(crossings, 8);
    }

    #[test]
    fn wired_dual_of_2x2() {
        let r = grid_block(2, 2);
        let d = wired_dual(&r);
        assert_eq!(d.internal.len(), 1);
        assert_eq!(d.external.len(), 4);
        assert_eq!(d.edges.len(), 4);
    }

    #[test]
    fn json_round_trip() {
        let r = grid_block(2, 3);
        let text = region_to_json(&r);
        let r2 = load_region_json(&text).unwrap();
        assert_eq!(r2.vertex_count(), r.vertex_count());
        assert_eq!(r2.edge_count(), r.edge_count());
    }

    #[test]
    fn loader_reports_failed_check() {
        let ring: Vec<Coord> = (0..3)
            .flat_map(|x| (0..3).map(move |y| (x, y)))
            .filter(|&c| c != (1, 1))
            .collect();
        let text = region_to_json(&build_grid_region(&ring, None).unwrap());
        assert_eq!(load_region_json(&text).unwrap_err(), RegionError::NotSimplyConnected);

        let two = r#"{"lattice":"Z2","cells":[[0,0],[5,5]]}"#;
        assert_eq!(load_region_json(two).unwrap_err(), RegionError::DisconnectedInput);
    }

    #[test]
    fn weights_apply_and_validate() {
        let mut weights = HashMap::new();
        weights.insert((0, 0), 5u64);
        let r = build_grid_region(&[(0, 0), (1, 0)], Some(&weights)).unwrap();
        assert_eq!(r.total_weight(), 6);
        let mut bad = HashMap::new();
        bad.insert((0, 0), 0u64);
        assert_eq!(
            build_grid_region(&[(0, 0), (1, 0)], Some(&bad)).unwrap_err(),
            RegionError::BadWeight((0, 0))
        );
    }

    /// Ring with a tail and a filled block hanging inside its hole: two
    /// nesting levels below the outer face.
    fn nested_region() -> PlanarRegion {
        let mut verts: Vec<Coord> = Vec::new();
        for x in 0..7 {
            for y in 0..7 {
                if x == 0 || y == 0 || x == 6 || y == 6 {
                    verts.push((x, y));
                }
            }
        }
        verts.push((3, 1));
        verts.extend([(3, 2), (4, 2), (3, 3), (4, 3)]);
        build_grid_region(&verts, None).unwrap()
    }

    #[test]
    fn nested_depths() {
        let r = nested_region();
        let fs = face_depths(&r);
        let mut by_depth = [0usize; 4];
        for f in &fs.faces {
            by_depth[f.depth as usize] += 1;
        }
        // Outer, the hole face (ring interior minus the hanging block), and
        // the block's single internal cell at depth 2.
        assert_eq!(by_depth[0], 1);
        assert_eq!(by_depth[1], 1);
        assert_eq!(by_depth[2], 1);
        let cell_depth = fs.depth_of_cell(&r, (3, 2));
        assert_eq!(cell_depth, 2);
    }

    #[test]
    fn dual_tree_complement() {
        let r = grid_block(2, 2);
        // Single internal cell: any one dual edge spans the contracted dual.
        let primal = dual_tree_to_primal_tree(&r, &[0]).unwrap();
        assert_eq!(primal.len(), 3);
        assert!(!primal.contains(&0));
        assert_eq!(
            dual_tree_to_primal_tree(&r, &[0, 1]).unwrap_err(),
            DualTreeError::NotSpanningTree
        );
        assert_eq!(
            dual_tree_to_primal_tree(&r, &[]).unwrap_err(),
            DualTreeError::NotSpanningTree
        );
    }
}
