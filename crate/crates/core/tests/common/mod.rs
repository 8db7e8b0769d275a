//! Shared fixtures and oracles for the integration suites.

#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tndp::citygraph::{load_city, CityGraph, ProblemParams, ShortestPathTable, TimeUnit};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("..").join("..").join("data")
}

/// The 15-node benchmark city shipped under `data/mandl`, with its stock
/// instance parameters (6 routes of 2..=8 stops).
pub fn load_mandl(alpha: f64) -> (CityGraph, ProblemParams) {
    let dir = data_dir().join("mandl");
    let mut params = ProblemParams::new(6, 2, 8);
    params.alpha = alpha;
    let city = load_city(
        dir.join("travel_times_minutes.txt"),
        dir.join("demand.txt"),
        params,
        TimeUnit::Minutes,
    )
    .expect("bundled mandl data should load");
    (city, params)
}

/// A random small instance with whole-second drive times and whole-unit
/// demand. Every cost the trip simulation can produce is then a sum of
/// integers, exactly representable in f64, so oracle comparisons may use
/// bitwise equality.
pub fn random_small_instance(rng: &mut ChaCha8Rng) -> (CityGraph, ProblemParams) {
    let n = rng.gen_range(5..=10);
    let coords = (0..n).map(|i| [100.0 * i as f64, 10.0 * (i % 3) as f64]).collect();

    let mut present = vec![false; n * n];
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v, 60.0 * rng.gen_range(1..=10) as f64));
        present[u * n + v] = true;
        present[v * n + u] = true;
    }
    for _ in 0..rng.gen_range(0..=n) {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && !present[u * n + v] {
            edges.push((u, v, 60.0 * rng.gen_range(1..=10) as f64));
            present[u * n + v] = true;
            present[v * n + u] = true;
        }
    }

    let mut demand = Array2::zeros((n, n));
    let mut any = false;
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(0.7) {
                let d = rng.gen_range(1..=20) as f64;
                demand[[i, j]] = d;
                demand[[j, i]] = d;
                any = true;
            }
        }
    }
    if !any {
        demand[[0, 1]] = 5.0;
        demand[[1, 0]] = 5.0;
    }

    let params = ProblemParams::new(rng.gen_range(1..=3), 2, 5);
    let city = CityGraph::new(coords, &edges, demand, params).expect("instance is valid");
    (city, params)
}

pub struct OracleTrips {
    pub time: Array2<f64>,
    pub transfers: Array2<u32>,
    pub reachable: Array2<bool>,
}

/// Reference trip answers by exhaustive itinerary search.
///
/// An itinerary is a chain of legs, each boarding one route somewhere and
/// riding it to another stop. Legs are enumerated level by level (level =
/// number of boardings), keeping per street node the cheapest raw cost at
/// each boarding count; a final itinerary's cost refunds one boarding
/// penalty. The search deepens until the penalty floor closes it: an
/// itinerary with more than `b` boardings costs at least `b * penalty`
/// plus the street-driving lower bound, so once every reachable
/// destination's best found cost is under that floor, no deeper itinerary
/// can win (ties lose on boarding count). Whether a destination is
/// reachable at all is settled by level S: a trip boarding some route twice
/// can always drop the segment between the two visits, so S routes never
/// need more than S boardings.
pub fn oracle_trips(
    city: &CityGraph,
    routes: &[Vec<usize>],
    sp: &ShortestPathTable,
    penalty: f64,
) -> OracleTrips {
    assert!(penalty > 0.0, "the search-closing bound needs a positive penalty");
    let n = city.n();

    let mut stops_at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut prefix: Vec<Vec<f64>> = Vec::new();
    for (r, stops) in routes.iter().enumerate() {
        let mut pre = vec![0.0];
        for w in stops.windows(2) {
            let t = city.edge_time(w[0], w[1]).expect("route stops must be street-adjacent");
            pre.push(pre.last().unwrap() + t);
        }
        prefix.push(pre);
        for (k, &node) in stops.iter().enumerate() {
            stops_at[node].push((r, k));
        }
    }

    let mut out = OracleTrips {
        time: Array2::from_elem((n, n), f64::INFINITY),
        transfers: Array2::zeros((n, n)),
        reachable: Array2::from_elem((n, n), false),
    };

    const MAX_BOARDINGS: usize = 64;
    for src in 0..n {
        // best[j] = lexicographically least (final cost, boardings) found
        let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); n];
        // frontier of the previous level: min raw cost per node
        let mut level: Vec<f64> = vec![f64::INFINITY; n];
        level[src] = 0.0;
        let mut boardings = 0;
        loop {
            boardings += 1;
            assert!(boardings <= MAX_BOARDINGS, "oracle search failed to close");
            let mut next: Vec<f64> = vec![f64::INFINITY; n];
            for node in 0..n {
                let raw = level[node];
                if !raw.is_finite() {
                    continue;
                }
                for &(r, a) in &stops_at[node] {
                    for b in 0..routes[r].len() {
                        if b == a {
                            continue;
                        }
                        let ride = (prefix[r][b] - prefix[r][a]).abs();
                        let arrived = raw + penalty + ride;
                        let dest = routes[r][b];
                        if arrived < next[dest] {
                            next[dest] = arrived;
                        }
                        let settled = (arrived - penalty, boardings);
                        if settled < best[dest] {
                            best[dest] = settled;
                        }
                    }
                }
            }
            let closed = (0..n).all(|j| {
                !best[j].0.is_finite() || best[j].0 <= boardings as f64 * penalty + sp.time(src, j)
            });
            if boardings >= routes.len() && closed {
                break;
            }
            level = next;
        }
        for j in 0..n {
            if j == src {
                out.time[[src, j]] = 0.0;
                out.reachable[[src, j]] = true;
            } else if best[j].0.is_finite() {
                out.time[[src, j]] = best[j].0;
                out.transfers[[src, j]] = (best[j].1 - 1) as u32;
                out.reachable[[src, j]] = true;
            }
        }
    }
    out
}

/// Street-path validity: consecutive stops adjacent, no node repeated.
pub fn assert_valid_route(city: &CityGraph, stops: &[usize]) {
    assert!(!stops.is_empty(), "route must have stops");
    for w in stops.windows(2) {
        assert!(
            city.edge_time(w[0], w[1]).is_some(),
            "stops {} and {} are not street-adjacent",
            w[0],
            w[1]
        );
    }
    let mut seen = vec![false; city.n()];
    for &s in stops {
        assert!(!seen[s], "node {s} repeats within a route");
        seen[s] = true;
    }
}
