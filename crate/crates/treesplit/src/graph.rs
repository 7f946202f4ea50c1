//! Small dense-id multigraph plus union-find, for exact counting,
//! reference samplers and tests. The hot sampling path works directly on
//! lattice coordinates and never touches this representation.

use crate::region::PlanarRegion;

#[derive(Clone, Debug)]
pub struct DisjointSets {
    parent: Vec<u32>,
    rank: Vec<u8>,
    sets: usize,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            sets: n,
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            self.parent[x as usize] = self.parent[self.parent[x as usize] as usize];
            x = self.parent[x as usize];
        }
        x
    }

    /// Merges the two sets; false when already joined.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
        self.sets -= 1;
        true
    }

    pub fn same(&mut self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }

    pub fn set_count(&self) -> usize {
        self.sets
    }
}

/// Undirected multigraph with stable edge ids. Parallel edges are allowed,
/// self-loops are not.
#[derive(Clone, Debug)]
pub struct MultiGraph {
    n: u32,
    edges: Vec<(u32, u32)>,
    adj: Vec<Vec<(u32, u32)>>,
}

impl MultiGraph {
    pub fn new(n: u32) -> Self {
        MultiGraph {
            n,
            edges: Vec::new(),
            adj: vec![Vec::new(); n as usize],
        }
    }

    pub fn from_edges(n: u32, edges: &[(u32, u32)]) -> Self {
        let mut g = MultiGraph::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_edge(&mut self, a: u32, b: u32) -> u32 {
        assert!(a != b, "self-loops are not representable");
        assert!(a < self.n && b < self.n);
        let id = self.edges.len() as u32;
        self.edges.push((a, b));
        self.adj[a as usize].push((b, id));
        self.adj[b as usize].push((a, id));
        id
    }

    pub fn vertex_count(&self) -> u32 {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn endpoints(&self, e: u32) -> (u32, u32) {
        self.edges[e as usize]
    }

    /// Incident (neighbor, edge id) pairs in insertion order.
    pub fn incident(&self, v: u32) -> &[(u32, u32)] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut dsu = DisjointSets::new(self.n as usize);
        for &(a, b) in &self.edges {
            dsu.union(a, b);
        }
        dsu.set_count() == 1
    }
}

/// The subgraph of a region induced by a sorted set of vertex ids, with
/// local ids equal to positions in `members`.
pub fn induced_multigraph(region: &PlanarRegion, members: &[u32]) -> MultiGraph {
    debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
    let mut g = MultiGraph::new(members.len() as u32);
    for (local, &v) in members.iter().enumerate() {
        for dir in [crate::lattice::EAST, crate::lattice::NORTH] {
            if let Some(u) = region.neighbor(v, dir) {
                if let Ok(other) = members.binary_search(&u) {
                    g.add_edge(local as u32, other as u32);
                }
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::grid_block;

    #[test]
    fn union_find_merges() {
        let mut d = DisjointSets::new(4);
        assert!(d.union(0, 1));
        assert!(!d.union(1, 0));
        assert!(d.union(2, 3));
        assert_eq!(d.set_count(), 2);
        assert!(d.same(0, 1));
        assert!(!d.same(1, 2));
    }

    #[test]
    fn parallel_edges_kept() {
        let g = MultiGraph::from_edges(2, &[(0, 1), (0, 1), (0, 1)]);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.degree(0), 3);
        assert!(g.is_connected());
    }

    #[test]
    fn induced_matches_region() {
        let r = grid_block(3, 3);
        let all: Vec<u32> = (0..r.vertex_count() as u32).collect();
        let g = induced_multigraph(&r, &all);
        assert_eq!(g.edge_count(), r.edge_count());
        assert!(g.is_connected());

        // Bottom row of the block.
        let row: Vec<u32> = (0..3)
            .map(|x| r.vertex_id((x, 0)).unwrap())
            .collect::<Vec<_>>();
        let mut row = row;
        row.sort_unstable();
        let gr = induced_multigraph(&r, &row);
        assert_eq!(gr.edge_count(), 2);
    }
}
