//! The square lattice and the geometric constants a lattice exposes.
//!
//! Only Z2 is built in. Everything the samplers need from the lattice is
//! funneled through [`Lattice`] so other tilings can be added without
//! touching the walk engine, but the region representation itself is
//! specialized to Z2.

/// Vertex or face coordinate. A face (unit cell) is named by its lower-left
/// primal vertex.
pub type Coord = (i32, i32);

/// Step offsets in rotation order: east, north, west, south.
pub const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

pub const EAST: usize = 0;
pub const NORTH: usize = 1;
pub const WEST: usize = 2;
pub const SOUTH: usize = 3;

#[inline]
pub fn opposite(dir: usize) -> usize {
    (dir + 2) & 3
}

#[inline]
pub fn step(c: Coord, dir: usize) -> Coord {
    (c.0 + DIRS[dir].0, c.1 + DIRS[dir].1)
}

/// Constants describing a lattice family's geometry. They feed the walk
/// policy (scale thresholds and step budgets); correctness of the samplers
/// never depends on them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeParams {
    /// Maximum primal or dual degree.
    pub b: u32,
    /// Lower bound on the probability of stepping along a prescribed arc.
    pub rho: f64,
    /// Radius beyond which the density bound applies.
    pub density_radius: f64,
    /// At most `density_coeff * r^2` vertices in any radius-r disk,
    /// for r >= `density_radius`.
    pub density_coeff: f64,
    /// Escape-time constant for walks leaving a vertex set.
    pub escape_coeff: f64,
}

impl LatticeParams {
    /// Constants for Z2. The degree bound and `rho` are exact (a walk takes
    /// each of the 4 arcs with probability 1/4 >= 1/8 over two steps in any
    /// diagonal direction); the density pair is the crude exact bound
    /// (2r+1)^2 <= 9r^2 for r >= 1; the escape coefficient is a heuristic
    /// unit value.
    pub fn z2() -> Self {
        LatticeParams {
            b: 4,
            rho: 0.125,
            density_radius: 1.0,
            density_coeff: 9.0,
            escape_coeff: 1.0,
        }
    }
}

/// Interface the samplers use to talk to a lattice.
pub trait Lattice {
    fn params(&self) -> LatticeParams;
    /// Primal neighbors of a vertex, in rotation order.
    fn vertex_neighbors(&self, v: Coord) -> [Coord; 4];
    /// Dual neighbors of a face, in rotation order.
    fn face_neighbors(&self, f: Coord) -> [Coord; 4];
    /// Endpoints of the primal edge crossed when stepping from face `f` in
    /// direction `dir`.
    fn crossing_edge(&self, f: Coord, dir: usize) -> (Coord, Coord);
    fn vertex_position(&self, v: Coord) -> (f64, f64);
    fn face_center(&self, f: Coord) -> (f64, f64);
}

/// The square lattice.
#[derive(Clone, Copy, Debug, Default)]
pub struct Z2;

impl Lattice for Z2 {
    fn params(&self) -> LatticeParams {
        LatticeParams::z2()
    }

    fn vertex_neighbors(&self, v: Coord) -> [Coord; 4] {
        [step(v, 0), step(v, 1), step(v, 2), step(v, 3)]
    }

    fn face_neighbors(&self, f: Coord) -> [Coord; 4] {
        [step(f, 0), step(f, 1), step(f, 2), step(f, 3)]
    }

    fn crossing_edge(&self, f: Coord, dir: usize) -> (Coord, Coord) {
        let (x, y) = f;
        match dir {
            EAST => ((x + 1, y), (x + 1, y + 1)),
            NORTH => ((x, y + 1), (x + 1, y + 1)),
            WEST => ((x, y), (x, y + 1)),
            SOUTH => ((x, y), (x + 1, y)),
            _ => unreachable!(),
        }
    }

    fn vertex_position(&self, v: Coord) -> (f64, f64) {
        (v.0 as f64, v.1 as f64)
    }

    fn face_center(&self, f: Coord) -> (f64, f64) {
        (f.0 as f64 + 0.5, f.1 as f64 + 0.5)
    }
}
