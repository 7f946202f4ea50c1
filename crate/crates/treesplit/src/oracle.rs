//! Exact reference computations for small instances: spanning tree counts
//! via the matrix-tree theorem, brute-force tree enumeration, and the exact
//! output distribution of balanced tree splitting. Everything here is
//! deliberately independent of the samplers so it can sit in judgment of
//! them.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::graph::{induced_multigraph, DisjointSets, MultiGraph};
use crate::region::PlanarRegion;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for exact enumeration ({0} candidates)")]
    TooLarge(u128),
    #[error("graph is not connected")]
    Disconnected,
}

/// Sorted vertex ids of the side containing vertex 0: a canonical name for
/// a 2-partition.
pub type SideKey = Vec<u32>;

/// Number of spanning trees, by reduced-Laplacian determinant. Handles
/// parallel edges; exact in big integers.
pub fn matrix_tree_count(g: &MultiGraph) -> BigUint {
    let n = g.vertex_count() as usize;
    if n == 0 {
        return BigUint::zero();
    }
    if n == 1 {
        return BigUint::one();
    }
    let mut lap = vec![vec![BigInt::zero(); n - 1]; n - 1];
    for &(a, b) in g.edges() {
        let (a, b) = (a as usize, b as usize);
        if a < n - 1 {
            lap[a][a] += 1;
        }
        if b < n - 1 {
            lap[b][b] += 1;
        }
        if a < n - 1 && b < n - 1 {
            lap[a][b] -= 1;
            lap[b][a] -= 1;
        }
    }
    let det = bareiss_determinant(lap);
    assert!(!det.is_negative(), "Laplacian minor determinant is nonnegative");
    det.to_biguint().unwrap()
}

/// Fraction-free Gaussian elimination; all intermediate divisions are exact.
fn bareiss_determinant(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(swap) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = num / &prev;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    sign * m[n - 1][n - 1].clone()
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    acc
}

const ENUMERATION_CAP: u128 = 4_000_000;

/// Every spanning tree as a sorted list of edge ids, by testing all
/// (n-1)-subsets of edges. Capped; intended for cross-checking only.
pub fn enumerate_spanning_trees(g: &MultiGraph) -> Result<Vec<Vec<u32>>, OracleError> {
    let n = g.vertex_count() as usize;
    let m = g.edge_count();
    if n == 0 || !g.is_connected() {
        return Err(OracleError::Disconnected);
    }
    if n == 1 {
        return Ok(vec![Vec::new()]);
    }
    let need = n - 1;
    if m < need {
        return Err(OracleError::Disconnected);
    }
    let candidates = binomial(m as u64, need as u64);
    if candidates > ENUMERATION_CAP {
        return Err(OracleError::TooLarge(candidates));
    }

    let mut trees = Vec::new();
    let mut pick: Vec<usize> = (0..need).collect();
    loop {
        let mut dsu = DisjointSets::new(n);
        let mut acyclic = true;
        for &i in &pick {
            let (a, b) = g.endpoints(i as u32);
            if !dsu.union(a, b) {
                acyclic = false;
                break;
            }
        }
        if acyclic && dsu.set_count() == 1 {
            trees.push(pick.iter().map(|&i| i as u32).collect());
        }
        // Next combination in lexicographic order.
        let mut i = need;
        loop {
            if i == 0 {
                return Ok(trees);
            }
            i -= 1;
            if pick[i] != i + m - need {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..need {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// All q-balanced 2-partitions with both sides connected, keyed by the side
/// containing vertex 0. Subset enumeration; region must be small.
pub fn balanced_2partitions(
    region: &PlanarRegion,
    q: u64,
) -> Result<Vec<SideKey>, OracleError> {
    let n = region.vertex_count();
    if n > 20 {
        return Err(OracleError::TooLarge(1u128 << n.min(127)));
    }
    let total = region.total_weight();
    let mut out = Vec::new();
    // Vertex 0 stays on side A, so iterate masks over vertices 1..n.
    for rest in 0u32..(1u32 << (n - 1)) {
        let mask = (rest << 1) | 1;
        let side_a: Vec<u32> = (0..n as u32).filter(|&v| mask >> v & 1 == 1).collect();
        if side_a.len() == n {
            continue;
        }
        let side_b: Vec<u32> = (0..n as u32).filter(|&v| mask >> v & 1 == 0).collect();
        let wa: u64 = side_a.iter().map(|&v| region.weight(v)).sum();
        // Both sides at least W/2 - q, in integer arithmetic.
        let lighter = wa.min(total - wa);
        if 2 * lighter + 2 * q < total {
            continue;
        }
        if induced_multigraph(region, &side_a).is_connected()
            && induced_multigraph(region, &side_b).is_connected()
        {
            out.push(side_a);
        }
    }
    Ok(out)
}

/// Number of region edges with endpoints on opposite sides.
pub fn cut_size(region: &PlanarRegion, side_a: &[u32]) -> usize {
    let mut in_a = vec![false; region.vertex_count()];
    for &v in side_a {
        in_a[v as usize] = true;
    }
    region
        .edges()
        .iter()
        .filter(|&&(a, b)| in_a[a as usize] != in_a[b as usize])
        .count()
}

pub fn tree_count_of_side(region: &PlanarRegion, side: &[u32]) -> BigUint {
    matrix_tree_count(&induced_multigraph(region, side))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactSplit {
    /// Probability of each partition, keyed canonically.
    pub probs: BTreeMap<SideKey, BigRational>,
    /// Probability that a tree admits no q-balance edge.
    pub bot: BigRational,
    /// Distribution of the number of q-balance edges over spanning trees.
    pub k_histogram: BTreeMap<usize, u64>,
}

impl ExactSplit {
    pub fn check_total(&self) -> bool {
        let sum: BigRational =
            self.probs.values().cloned().sum::<BigRational>() + self.bot.clone();
        sum.is_one()
    }

    /// Probabilities as floats for the comparison layer: canonically
    /// ordered partition cells followed by the bot mass.
    pub fn as_f64_cells(&self) -> (Vec<(SideKey, f64)>, f64) {
        let cells = self
            .probs
            .iter()
            .map(|(k, v)| (k.clone(), v.to_f64().expect("probability fits f64")))
            .collect();
        (cells, self.bot.to_f64().expect("probability fits f64"))
    }
}

/// Exact output law of balanced splitting for q = 0, without touching
/// trees: a tree-weighted partition is hit with probability
/// t(A) * t(B) * |cut| / t(G), and the remainder is bot.
pub fn split_distribution_closed_form(
    region: &PlanarRegion,
) -> Result<ExactSplit, OracleError> {
    let all: Vec<u32> = (0..region.vertex_count() as u32).collect();
    let tau_g = matrix_tree_count(&induced_multigraph(region, &all));
    let tau_g = BigRational::from_integer(BigInt::from(tau_g));
    let mut probs = BTreeMap::new();
    let mut covered = BigRational::zero();
    for side_a in balanced_2partitions(region, 0)? {
        let side_b: Vec<u32> = all
            .iter()
            .copied()
            .filter(|v| side_a.binary_search(v).is_err())
            .collect();
        let weight = BigInt::from(tree_count_of_side(region, &side_a))
            * BigInt::from(tree_count_of_side(region, &side_b))
            * BigInt::from(cut_size(region, &side_a));
        let p = BigRational::from_integer(weight) / tau_g.clone();
        covered += p.clone();
        probs.insert(side_a, p);
    }
    Ok(ExactSplit {
        probs,
        bot: BigRational::one() - covered,
        k_histogram: BTreeMap::new(),
    })
}

/// Exact output law of q-balanced splitting by full tree enumeration: each
/// spanning tree contributes 1/k(T) to each of its k(T) splits, or to bot
/// when k(T) = 0.
pub fn split_distribution_by_trees(
    region: &PlanarRegion,
    q: u64,
) -> Result<ExactSplit, OracleError> {
    let n = region.vertex_count();
    let all: Vec<u32> = (0..n as u32).collect();
    let g = induced_multigraph(region, &all);
    let trees = enumerate_spanning_trees(&g)?;
    let tau = trees.len() as u64;
    let total = region.total_weight();

    let mut probs: BTreeMap<SideKey, BigRational> = BTreeMap::new();
    let mut k_histogram: BTreeMap<usize, u64> = BTreeMap::new();
    let mut bot_trees = 0u64;
    let mut adj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];

    for tree in &trees {
        for v in &mut adj {
            v.clear();
        }
        for &e in tree {
            let (a, b) = g.endpoints(e);
            adj[a as usize].push((b, e));
            adj[b as usize].push((a, e));
        }
        // Subtree weights from a rooted DFS.
        let mut order = Vec::with_capacity(n);
        let mut parent = vec![u32::MAX; n];
        let mut stack = vec![0u32];
        let mut seen = vec![false; n];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(u, _) in &adj[v as usize] {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    parent[u as usize] = v;
                    stack.push(u);
                }
            }
        }
        let mut down = vec![0u64; n];
        for &v in order.iter().rev() {
            down[v as usize] += region.weight(v);
            let p = parent[v as usize];
            if p != u32::MAX {
                down[p as usize] += down[v as usize];
            }
        }
        let balance_children: Vec<u32> = (1..n as u32)
            .filter(|&v| {
                let s = down[v as usize];
                let lighter = s.min(total - s);
                2 * lighter + 2 * q >= total
            })
            .collect();
        let k = balance_children.len();
        *k_histogram.entry(k).or_insert(0) += 1;
        if k == 0 {
            bot_trees += 1;
            continue;
        }
        let share = BigRational::new(
            BigInt::one(),
            BigInt::from(tau) * BigInt::from(k as u64),
        );
        for &v in &balance_children {
            // Component below v, canonicalized to the side holding vertex 0.
            let mut below = vec![false; n];
            mark_subtree(&adj, v, parent[v as usize], &mut below);
            let key: SideKey = if below[0] {
                (0..n as u32).filter(|&u| below[u as usize]).collect()
            } else {
                (0..n as u32).filter(|&u| !below[u as usize]).collect()
            };
            *probs.entry(key).or_insert_with(BigRational::zero) += share.clone();
        }
    }

    Ok(ExactSplit {
        probs,
        bot: BigRational::new(BigInt::from(bot_trees), BigInt::from(tau)),
        k_histogram,
    })
}

fn mark_subtree(adj: &[Vec<(u32, u32)>], v: u32, ban: u32, out: &mut [bool]) {
    let mut stack = vec![(v, ban)];
    while let Some((v, ban)) = stack.pop() {
        out[v as usize] = true;
        for &(u, _) in &adj[v as usize] {
            if u != ban && !out[u as usize] {
                stack.push((u, v));
            }
        }
    }
}
