//! Passenger trip simulation on a transit network.
//!
//! Trips are resolved on an expanded graph: one vertex per street node plus
//! one vertex per (route, stop) position. Boarding a route at a stop costs
//! the transfer penalty, riding to an adjacent stop costs that segment's
//! drive time, and alighting is free. A lexicographic Dijkstra on
//! (generalized time, boardings) then yields, per origin, the fastest trip
//! and — among equally fast trips — the fewest boardings. The first
//! boarding's penalty is refunded at the end so a one-seat ride costs pure
//! drive time and each transfer costs one penalty.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ndarray::Array2;
use ordered_float::OrderedFloat;

use crate::citygraph::CityGraph;

/// Per-passenger-pair outcome of simulating every trip on a network.
#[derive(Debug, Clone)]
pub struct TransitTripTable {
    /// Generalized travel time in seconds (drive time plus one transfer
    /// penalty per transfer); `INFINITY` where no trip exists.
    pub time: Array2<f64>,
    /// Number of transfers on the returned trip (0 where unreachable).
    pub transfers: Array2<u32>,
    pub reachable: Array2<bool>,
}

impl TransitTripTable {
    pub fn compute<'a>(
        city: &CityGraph,
        routes: impl Iterator<Item = &'a [usize]>,
        transfer_penalty: f64,
    ) -> Self {
        let n = city.n();
        let mut table = TransitTripTable {
            time: Array2::from_elem((n, n), f64::INFINITY),
            transfers: Array2::zeros((n, n)),
            reachable: Array2::from_elem((n, n), false),
        };
        let mut scratch = TripScratch::new(n);
        scratch.load(city, routes);
        for i in 0..n {
            scratch.search(i, transfer_penalty);
            scratch.write_row(i, transfer_penalty, &mut table);
        }
        table
    }
}

/// Reusable buffers for trip searches; loading a network and running one
/// source allocates nothing after warm-up.
#[derive(Debug, Clone)]
pub(crate) struct TripScratch {
    n: usize,
    /// Expanded vertices of the stops at each street node.
    node_stops: Vec<Vec<u32>>,
    /// Street node under each stop vertex.
    stop_node: Vec<u32>,
    /// Drive time to the previous/next stop on the same route, NAN at ends.
    ride_prev: Vec<f64>,
    ride_next: Vec<f64>,
    dist: Vec<f64>,
    boards: Vec<u32>,
    heap: BinaryHeap<Reverse<(OrderedFloat<f64>, u32, u32)>>,
}

impl TripScratch {
    pub fn new(n: usize) -> Self {
        TripScratch {
            n,
            node_stops: vec![Vec::new(); n],
            stop_node: Vec::new(),
            ride_prev: Vec::new(),
            ride_next: Vec::new(),
            dist: Vec::new(),
            boards: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }

    /// Rebuilds the expanded graph for a route set.
    pub fn load<'a>(&mut self, city: &CityGraph, routes: impl Iterator<Item = &'a [usize]>) {
        for stops in &mut self.node_stops {
            stops.clear();
        }
        self.stop_node.clear();
        self.ride_prev.clear();
        self.ride_next.clear();
        for stops in routes {
            let first = self.stop_node.len();
            for (k, &node) in stops.iter().enumerate() {
                let vertex = (first + k) as u32;
                self.node_stops[node].push(vertex);
                self.stop_node.push(node as u32);
                self.ride_prev.push(if k == 0 {
                    f64::NAN
                } else {
                    city.edge_time(stops[k - 1], node).expect("route stops must be street-adjacent")
                });
                self.ride_next.push(if k + 1 == stops.len() {
                    f64::NAN
                } else {
                    city.edge_time(node, stops[k + 1]).expect("route stops must be street-adjacent")
                });
            }
        }
        let total = self.n + self.stop_node.len();
        self.dist.resize(total, f64::INFINITY);
        self.boards.resize(total, 0);
    }

    /// Lexicographic Dijkstra over (time, boardings) from one street node.
    pub fn search(&mut self, source: usize, transfer_penalty: f64) {
        let n = self.n;
        for d in &mut self.dist {
            *d = f64::INFINITY;
        }
        for b in &mut self.boards {
            *b = 0;
        }
        self.heap.clear();
        self.dist[source] = 0.0;
        self.heap.push(Reverse((OrderedFloat(0.0), 0, source as u32)));

        while let Some(Reverse((OrderedFloat(t), b, v))) = self.heap.pop() {
            let v = v as usize;
            if t > self.dist[v] || (t == self.dist[v] && b > self.boards[v]) {
                continue;
            }
            if v < n {
                // Street node: board any stop here.
                for si in 0..self.node_stops[v].len() {
                    let sv = self.node_stops[v][si] as usize;
                    self.relax(n + sv, t + transfer_penalty, b + 1);
                }
            } else {
                let s = v - n;
                // Alight at the street node, free.
                self.relax(self.stop_node[s] as usize, t, b);
                let prev = self.ride_prev[s];
                if !prev.is_nan() {
                    self.relax(v - 1, t + prev, b);
                }
                let next = self.ride_next[s];
                if !next.is_nan() {
                    self.relax(v + 1, t + next, b);
                }
            }
        }
    }

    fn relax(&mut self, w: usize, t: f64, b: u32) {
        if t < self.dist[w] || (t == self.dist[w] && b < self.boards[w]) {
            self.dist[w] = t;
            self.boards[w] = b;
            self.heap.push(Reverse((OrderedFloat(t), b, w as u32)));
        }
    }

    pub fn write_row(&self, source: usize, transfer_penalty: f64, table: &mut TransitTripTable) {
        for j in 0..self.n {
            if j == source {
                table.time[[source, j]] = 0.0;
                table.transfers[[source, j]] = 0;
                table.reachable[[source, j]] = true;
            } else if self.dist[j].is_finite() {
                // Every trip boards at least once; refund the first boarding
                // so only transfers are penalized.
                table.time[[source, j]] = self.dist[j] - transfer_penalty;
                table.transfers[[source, j]] = self.boards[j] - 1;
                table.reachable[[source, j]] = true;
            } else {
                table.time[[source, j]] = f64::INFINITY;
                table.transfers[[source, j]] = 0;
                table.reachable[[source, j]] = false;
            }
        }
    }

    pub fn trip(&self, j: usize, transfer_penalty: f64) -> Option<(f64, u32)> {
        if self.dist[j].is_finite() {
            Some((self.dist[j] - transfer_penalty, self.boards[j] - 1))
        } else {
            None
        }
    }
}
