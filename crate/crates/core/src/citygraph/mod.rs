//! City instances: a street graph with drive times, an origin-destination
//! demand matrix, and the parameters a network is designed under.

pub mod io;
pub mod shortest;
pub mod synth;

pub use io::{city_to_json, load_city, load_city_json, parse_matrix, save_city, TimeUnit};
pub use shortest::{build_shortest_paths, ShortestPathTable};
pub use synth::{generate_city, GrowthProcess, SyntheticCityConfig};

use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Design parameters for one problem instance. Times are in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Required number of routes in a network.
    pub num_routes: usize,
    /// Minimum stops per route.
    pub min_stops: usize,
    /// Maximum stops per route.
    pub max_stops: usize,
    /// Perceived time penalty per transfer, seconds.
    pub transfer_penalty: f64,
    /// Trade-off between passenger and operator cost, in [0, 1].
    /// 1 weighs passengers only, 0 weighs operators only.
    pub alpha: f64,
    /// Weight of the constraint-violation cost term.
    pub beta: f64,
}

impl ProblemParams {
    pub fn new(num_routes: usize, min_stops: usize, max_stops: usize) -> Self {
        ProblemParams {
            num_routes,
            min_stops,
            max_stops,
            transfer_penalty: 300.0,
            alpha: 1.0,
            beta: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_routes == 0 {
            return Err(Error::Validation("num_routes must be positive".into()));
        }
        if self.min_stops < 2 || self.min_stops > self.max_stops {
            return Err(Error::Validation(format!(
                "stop bounds must satisfy 2 <= min <= max, got {}..{}",
                self.min_stops, self.max_stops
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Validation(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) || !(self.transfer_penalty >= 0.0) {
            return Err(Error::Validation("beta and transfer_penalty must be non-negative".into()));
        }
        Ok(())
    }
}

/// A city: `n` street nodes with coordinates (metres), symmetric drive-time
/// street edges (seconds), and a symmetric, zero-diagonal demand matrix.
///
/// The street graph is always connected; constructors reject anything else.
#[derive(Debug, Clone)]
pub struct CityGraph {
    coords: Vec<[f64; 2]>,
    /// Adjacency lists sorted by neighbour index: `adj[i]` holds `(j, drive time)`.
    adj: Vec<Vec<(usize, f64)>>,
    demand: Array2<f64>,
    total_demand: f64,
    demand_pairs: usize,
    max_demand: f64,
    pub params: ProblemParams,
}

impl CityGraph {
    /// Builds and validates a city. `edges` lists each undirected street edge
    /// once as `(i, j, drive_time_seconds)`.
    pub fn new(
        coords: Vec<[f64; 2]>,
        edges: &[(usize, usize, f64)],
        demand: Array2<f64>,
        params: ProblemParams,
    ) -> Result<Self> {
        params.validate()?;
        let n = coords.len();
        if n < 2 {
            return Err(Error::Validation(format!("a city needs at least 2 nodes, got {n}")));
        }
        if params.max_stops > n {
            return Err(Error::Validation(format!(
                "max_stops {} exceeds the city's {n} nodes",
                params.max_stops
            )));
        }
        if demand.nrows() != n || demand.ncols() != n {
            return Err(Error::Validation(format!(
                "demand matrix is {}x{}, expected {n}x{n}",
                demand.nrows(),
                demand.ncols()
            )));
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, tau) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::Validation(format!("bad street edge ({i}, {j})")));
            }
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::Validation(format!(
                    "street edge ({i}, {j}) has non-positive drive time {tau}"
                )));
            }
            if adj[i].iter().any(|&(k, _)| k == j) {
                return Err(Error::Validation(format!("duplicate street edge ({i}, {j})")));
            }
            adj[i].push((j, tau));
            adj[j].push((i, tau));
        }
        for list in &mut adj {
            list.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        }

        let mut total_demand = 0.0;
        let mut demand_pairs = 0;
        let mut max_demand = 0.0f64;
        for i in 0..n {
            if demand[[i, i]] != 0.0 {
                return Err(Error::Validation(format!("demand diagonal must be zero, D[{i}][{i}] != 0")));
            }
            for j in 0..n {
                let d = demand[[i, j]];
                if !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::Validation(format!("demand D[{i}][{j}] = {d} is invalid")));
                }
                if d != demand[[j, i]] {
                    return Err(Error::Validation(format!(
                        "demand matrix is asymmetric at ({i}, {j}): {d} vs {}",
                        demand[[j, i]]
                    )));
                }
                total_demand += d;
                if d > 0.0 {
                    demand_pairs += 1;
                }
                max_demand = max_demand.max(d);
            }
        }

        let city = CityGraph {
            coords,
            adj,
            demand,
            total_demand,
            demand_pairs,
            max_demand,
            params,
        };
        if !city.is_connected() {
            return Err(Error::Validation("street graph is not connected".into()));
        }
        Ok(city)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Street neighbours of `i` with drive times, sorted by node index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    /// Drive time of the street edge (i, j), if one exists.
    pub fn edge_time(&self, i: usize, j: usize) -> Option<f64> {
        self.adj[i]
            .binary_search_by(|&(k, _)| k.cmp(&j))
            .ok()
            .map(|pos| self.adj[i][pos].1)
    }

    /// All undirected street edges, each reported once with i < j.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&(j, _)| i < j).map(move |&(j, tau)| (i, j, tau)))
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|l| l.len()).sum::<usize>() / 2
    }

    pub fn demand(&self) -> &Array2<f64> {
        &self.demand
    }

    pub fn demand_at(&self, i: usize, j: usize) -> f64 {
        self.demand[[i, j]]
    }

    /// Sum of all demand entries (both directions of every pair).
    pub fn total_demand(&self) -> f64 {
        self.total_demand
    }

    /// Number of ordered pairs with positive demand.
    pub fn demand_pairs(&self) -> usize {
        self.demand_pairs
    }

    pub fn max_demand(&self) -> f64 {
        self.max_demand
    }

    fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }
}

/// Symmetrizes a drive-time matrix by keeping the larger direction of each
/// pair: `out[i][j] = out[j][i] = max(t[i][j], t[j][i])`.
///
/// An `inf` entry marks a missing direction and wins the max, so an edge
/// survives only if both directions exist.
pub fn enforce_symmetry(times: &Array2<f64>) -> Array2<f64> {
    let n = times.nrows();
    assert_eq!(n, times.ncols(), "drive-time matrix must be square");
    let mut out = times.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = out[[i, j]].max(out[[j, i]]);
            out[[i, j]] = m;
            out[[j, i]] = m;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn small_params() -> ProblemParams {
        ProblemParams::new(1, 2, 3)
    }

    fn zero_demand(n: usize) -> Array2<f64> {
        Array2::zeros((n, n))
    }

    #[test]
    fn builds_a_valid_city() {
        let city = CityGraph::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            &[(0, 1, 60.0), (1, 2, 30.0)],
            arr2(&[[0.0, 5.0, 1.0], [5.0, 0.0, 2.0], [1.0, 2.0, 0.0]]),
            small_params(),
        )
        .unwrap();
        assert_eq!(city.n(), 3);
        assert_eq!(city.num_edges(), 2);
        assert_eq!(city.edge_time(1, 0), Some(60.0));
        assert_eq!(city.edge_time(0, 2), None);
        assert_eq!(city.total_demand(), 16.0);
        assert_eq!(city.demand_pairs(), 6);
        assert_eq!(city.max_demand(), 5.0);
    }

    #[test]
    fn rejects_disconnected_street_graph() {
        let err = CityGraph::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            &[(0, 1, 60.0)],
            zero_demand(3),
            small_params(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("not connected"), "{err}");
    }

    #[test]
    fn rejects_asymmetric_demand() {
        let err = CityGraph::new(
            vec![[0.0, 0.0], [1.0, 0.0]],
            &[(0, 1, 60.0)],
            arr2(&[[0.0, 3.0], [4.0, 0.0]]),
            ProblemParams::new(1, 2, 2),
        )
        .unwrap_err();
        assert!(err.to_string().contains("asymmetric"), "{err}");
    }

    #[test]
    fn rejects_nonzero_demand_diagonal() {
        let err = CityGraph::new(
            vec![[0.0, 0.0], [1.0, 0.0]],
            &[(0, 1, 60.0)],
            arr2(&[[1.0, 0.0], [0.0, 0.0]]),
            ProblemParams::new(1, 2, 2),
        )
        .unwrap_err();
        assert!(err.to_string().contains("diagonal"), "{err}");
    }

    #[test]
    fn symmetrization_keeps_larger_direction() {
        let t = arr2(&[[0.0, 10.0], [20.0, 0.0]]);
        let s = enforce_symmetry(&t);
        assert_eq!(s, arr2(&[[0.0, 20.0], [20.0, 0.0]]));
        // Already-symmetric input is a fixed point.
        assert_eq!(enforce_symmetry(&s), s);
    }

    #[test]
    fn symmetrization_drops_one_directional_edges() {
        let inf = f64::INFINITY;
        let t = arr2(&[[0.0, 5.0], [inf, 0.0]]);
        let s = enforce_symmetry(&t);
        assert_eq!(s[[0, 1]], inf);
        assert_eq!(s[[1, 0]], inf);
    }

    #[test]
    fn symmetrization_matches_elementwise_max_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::seed_rng(11);
        let n = 5;
        let t = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.0..100.0));
        let s = enforce_symmetry(&t);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    assert_eq!(s[[i, j]], t[[i, j]]);
                } else {
                    assert_eq!(s[[i, j]], t[[i, j]].max(t[[j, i]]));
                }
            }
        }
    }
}
