//! All-pairs shortest street paths with canonical tie-breaking.
//!
//! Many shortest paths can tie; downstream construction and mutation steps
//! need one canonical representative per unordered node pair so that runs
//! are reproducible. Ties are broken toward the lexicographically smallest
//! node sequence, and the pair {i, j} is stored once: the path looked up
//! from j to i is exactly the reverse of the one from i to j.

use super::CityGraph;
use ndarray::Array2;
use ordered_float::OrderedFloat;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Dense all-pairs drive times plus one canonical shortest path per pair.
#[derive(Debug, Clone)]
pub struct ShortestPathTable {
    n: usize,
    times: Array2<f64>,
    /// Canonical node sequences for pairs {i, j} with i < j, stored in
    /// i-to-j orientation and indexed by `pair_index`.
    paths: Vec<Vec<u16>>,
    max_time: f64,
}

/// A borrowed path, iterated in the requested direction.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    nodes: &'a [u16],
    reversed: bool,
}

impl<'a> PathView<'a> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> usize {
        if self.reversed { *self.nodes.last().unwrap() as usize } else { self.nodes[0] as usize }
    }

    pub fn last(&self) -> usize {
        if self.reversed { self.nodes[0] as usize } else { *self.nodes.last().unwrap() as usize }
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = usize> + ExactSizeIterator + 'a {
        let (nodes, reversed) = (self.nodes, self.reversed);
        (0..nodes.len()).map(move |k| {
            let idx = if reversed { nodes.len() - 1 - k } else { k };
            nodes[idx] as usize
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl ShortestPathTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Shortest drive time between i and j, seconds.
    pub fn time(&self, i: usize, j: usize) -> f64 {
        self.times[[i, j]]
    }

    pub fn times(&self) -> &Array2<f64> {
        &self.times
    }

    /// Largest shortest-path time over all pairs; normalizes the cost terms.
    pub fn max_time(&self) -> f64 {
        self.max_time
    }

    /// Canonical shortest path from i to j (i != j), endpoints included.
    ///
    /// `path(j, i)` iterates the same nodes in reverse order.
    pub fn path(&self, i: usize, j: usize) -> PathView<'_> {
        assert_ne!(i, j, "paths are defined for distinct endpoints");
        let (lo, hi, reversed) = if i < j { (i, j, false) } else { (j, i, true) };
        PathView {
            nodes: &self.paths[pair_index(self.n, lo, hi)],
            reversed,
        }
    }

    /// Number of nodes on the canonical path between i and j.
    pub fn path_len(&self, i: usize, j: usize) -> usize {
        if i == j {
            return 1;
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.paths[pair_index(self.n, lo, hi)].len()
    }
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

fn dijkstra(city: &CityGraph, source: usize, dist: &mut [f64]) {
    dist.fill(f64::INFINITY);
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((OrderedFloat(0.0), source)));
    while let Some(Reverse((OrderedFloat(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, tau) in city.neighbors(u) {
            let nd = d + tau;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((OrderedFloat(nd), v)));
            }
        }
    }
}

/// Computes the all-pairs table. The street graph is connected, so every
/// entry is finite.
pub fn build_shortest_paths(city: &CityGraph) -> ShortestPathTable {
    let n = city.n();
    assert!(n <= u16::MAX as usize, "node indices must fit in u16");
    let mut times = Array2::from_elem((n, n), 0.0);
    let mut paths: Vec<Vec<u16>> = vec![Vec::new(); n * (n - 1) / 2];
    let mut dist = vec![0.0f64; n];

    for j in 0..n {
        // Distances to j; by edge symmetry these equal distances from j.
        dijkstra(city, j, &mut dist);
        for i in 0..j {
            times[[i, j]] = dist[i];
            times[[j, i]] = dist[i];
            paths[pair_index(n, i, j)] = walk_lex_min(city, &dist, i, j);
        }
    }

    let mut max_time = 0.0f64;
    for v in times.iter() {
        max_time = max_time.max(*v);
    }
    ShortestPathTable { n, times, paths, max_time }
}

/// Walks from i to j, always stepping to the lowest-index neighbour that
/// stays on a shortest path (`dist` holds exact distances to j as computed
/// by Dijkstra, so at least one neighbour always qualifies).
fn walk_lex_min(city: &CityGraph, dist_to_j: &[f64], i: usize, j: usize) -> Vec<u16> {
    let mut path = Vec::with_capacity(8);
    let mut u = i;
    path.push(u as u16);
    while u != j {
        let mut next = usize::MAX;
        for &(v, tau) in city.neighbors(u) {
            if tau + dist_to_j[v] == dist_to_j[u] {
                next = v;
                break; // neighbours are sorted, so the first hit is the smallest
            }
        }
        assert!(next != usize::MAX, "shortest-path walk lost track between {i} and {j}");
        u = next;
        path.push(u as u16);
    }
    path
}
