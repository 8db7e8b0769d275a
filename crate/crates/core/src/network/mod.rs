//! Transit networks and their evaluation: route sets over a city graph,
//! the passenger/operator/constraint cost terms, and a reusable evaluator
//! for the scalarized objective.

mod connectivity;
mod trips;

pub use connectivity::{TransitConnectivity, UnionFind};
pub use trips::TransitTripTable;

pub(crate) use trips::TripScratch;

use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::citygraph::{CityGraph, ProblemParams, ShortestPathTable};
use crate::error::{Error, Result};

/// A transit route: a walk over street edges, served in both directions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route {
    pub stops: Vec<usize>,
}

impl Route {
    pub fn new(stops: Vec<usize>) -> Self {
        Route { stops }
    }
}

impl From<Vec<usize>> for Route {
    fn from(stops: Vec<usize>) -> Self {
        Route { stops }
    }
}

impl Deref for Route {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.stops
    }
}

/// A set of routes proposed as the city's transit system.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitNetwork {
    pub routes: Vec<Route>,
}

impl TransitNetwork {
    pub fn new(routes: Vec<Route>) -> Self {
        TransitNetwork { routes }
    }

    pub fn route_slices(&self) -> impl Iterator<Item = &[usize]> + Clone {
        self.routes.iter().map(|r| r.stops.as_slice())
    }

    /// Checks that every route can actually be driven: at least two stops,
    /// valid node indices, and consecutive stops joined by a street edge.
    /// Size and node-repetition limits are constraint violations, not
    /// validity errors; see [`check_constraints`].
    pub fn validate(&self, city: &CityGraph) -> Result<()> {
        for (idx, route) in self.routes.iter().enumerate() {
            if route.len() < 2 {
                return Err(Error::Validation(format!(
                    "route {} has {} stop(s); a route needs at least 2",
                    idx,
                    route.len()
                )));
            }
            for &s in route.iter() {
                if s >= city.n() {
                    return Err(Error::Validation(format!(
                        "route {} visits node {} but the city has only {} nodes",
                        idx,
                        s,
                        city.n()
                    )));
                }
            }
            for w in route.stops.windows(2) {
                if city.edge_time(w[0], w[1]).is_none() {
                    return Err(Error::Validation(format!(
                        "route {} steps from node {} to node {} but no street edge joins them",
                        idx, w[0], w[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Drive time along a route, one direction.
pub fn route_time(city: &CityGraph, stops: &[usize]) -> f64 {
    stops
        .windows(2)
        .map(|w| {
            city.edge_time(w[0], w[1])
                .expect("route stops must be street-adjacent")
        })
        .sum()
}

/// Total driver time across the network, counting each route once.
pub fn operator_cost(city: &CityGraph, net: &TransitNetwork) -> f64 {
    net.routes.iter().map(|r| route_time(city, r)).sum()
}

/// Demand-weighted mean generalized trip time in seconds. Pairs the network
/// leaves unconnected ride a phantom trip of twice the longest inter-node
/// drive time, so stranding demand is always worse than any real trip.
pub fn passenger_cost(
    city: &CityGraph,
    sp: &ShortestPathTable,
    net: &TransitNetwork,
    transfer_penalty: f64,
) -> f64 {
    let table = TransitTripTable::compute(city, net.route_slices(), transfer_penalty);
    let n = city.n();
    let mut weighted = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = city.demand_at(i, j);
            if d == 0.0 {
                continue;
            }
            let t = if table.reachable[[i, j]] {
                table.time[[i, j]]
            } else {
                2.0 * sp.max_time()
            };
            weighted += d * t;
        }
    }
    weighted / city.total_demand()
}

/// The pieces of the constraint-violation cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCost {
    /// Share of demand-positive ordered pairs with no transit path.
    pub frac_unconnected: f64,
    /// Total stop-count excess outside `[min_stops, max_stops]`, scaled by
    /// `1 / (num_routes * max_stops)`.
    pub size_penalty: f64,
    /// Whether either term is nonzero.
    pub violation: bool,
    pub total: f64,
}

/// Penalty for stranded demand and out-of-size routes:
/// both shares plus a constant 0.1 whenever any violation exists, so that a
/// barely-violating network can never undercut a clean one.
pub fn constraint_cost(
    city: &CityGraph,
    net: &TransitNetwork,
    params: &ProblemParams,
) -> ConstraintCost {
    let mut conn = TransitConnectivity::build(city.n(), net.route_slices());
    let unconnected = conn.count_unconnected(city);
    let frac_unconnected = unconnected as f64 / city.demand_pairs() as f64;
    let size_penalty = size_penalty(net.route_slices().map(|r| r.len()), params);
    pack_constraint_cost(frac_unconnected, size_penalty)
}

pub(crate) fn size_penalty(route_lens: impl Iterator<Item = usize>, params: &ProblemParams) -> f64 {
    let mut excess = 0usize;
    for len in route_lens {
        if len < params.min_stops {
            excess += params.min_stops - len;
        } else if len > params.max_stops {
            excess += len - params.max_stops;
        }
    }
    excess as f64 / (params.num_routes * params.max_stops) as f64
}

pub(crate) fn pack_constraint_cost(frac_unconnected: f64, size_penalty: f64) -> ConstraintCost {
    let violation = frac_unconnected > 0.0 || size_penalty > 0.0;
    ConstraintCost {
        frac_unconnected,
        size_penalty,
        violation,
        total: frac_unconnected + size_penalty + if violation { 0.1 } else { 0.0 },
    }
}

/// Demand shares (percent) by trips with 0, 1, and 2 transfers; `d_un`
/// collects demand needing 3+ transfers or with no trip at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferShares {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_un: f64,
}

pub fn transfer_metrics(
    city: &CityGraph,
    net: &TransitNetwork,
    transfer_penalty: f64,
) -> TransferShares {
    let table = TransitTripTable::compute(city, net.route_slices(), transfer_penalty);
    let n = city.n();
    let mut buckets = [0.0f64; 4];
    for i in 0..n {
        for j in 0..n {
            let d = city.demand_at(i, j);
            if d == 0.0 {
                continue;
            }
            if table.reachable[[i, j]] && table.transfers[[i, j]] <= 2 {
                buckets[table.transfers[[i, j]] as usize] += d;
            } else {
                buckets[3] += d;
            }
        }
    }
    let scale = 100.0 / city.total_demand();
    TransferShares {
        d0: buckets[0] * scale,
        d1: buckets[1] * scale,
        d2: buckets[2] * scale,
        d_un: buckets[3] * scale,
    }
}

/// Scalarized network cost: `alpha` trades the passenger term against the
/// operator term (each normalized to be dimensionless), plus `beta` times
/// the constraint penalty.
pub fn total_cost(
    city: &CityGraph,
    sp: &ShortestPathTable,
    net: &TransitNetwork,
    params: &ProblemParams,
) -> f64 {
    let cp = passenger_cost(city, sp, net, params.transfer_penalty);
    let co = operator_cost(city, net);
    let cc = constraint_cost(city, net, params);
    combine_costs(cp, co, cc.total, sp.max_time(), params)
}

pub(crate) fn combine_costs(
    cp: f64,
    co: f64,
    cc: f64,
    max_drive_time: f64,
    params: &ProblemParams,
) -> f64 {
    let w_p = 1.0 / max_drive_time;
    let w_o = 1.0 / (params.num_routes as f64 * max_drive_time);
    params.alpha * w_p * cp + (1.0 - params.alpha) * w_o * co + params.beta * cc
}

/// Per-constraint audit of a network against its problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Ordered demand-positive pairs with no transit path.
    pub unconnected_demand_pairs: usize,
    pub expected_routes: usize,
    pub actual_routes: usize,
    /// Route indices with fewer than `min_stops` stops.
    pub undersized_routes: Vec<usize>,
    /// Route indices with more than `max_stops` stops.
    pub oversized_routes: Vec<usize>,
    /// Route indices visiting some node twice.
    pub routes_with_repeats: Vec<usize>,
}

impl ConstraintReport {
    pub fn all_satisfied(&self) -> bool {
        self.unconnected_demand_pairs == 0
            && self.expected_routes == self.actual_routes
            && self.undersized_routes.is_empty()
            && self.oversized_routes.is_empty()
            && self.routes_with_repeats.is_empty()
    }

    pub fn describe(&self) -> String {
        let mut lines = Vec::new();
        if self.unconnected_demand_pairs > 0 {
            lines.push(format!(
                "{} demand pair(s) have no transit path",
                self.unconnected_demand_pairs
            ));
        }
        if self.expected_routes != self.actual_routes {
            lines.push(format!(
                "network has {} route(s), instance requires {}",
                self.actual_routes, self.expected_routes
            ));
        }
        if !self.undersized_routes.is_empty() {
            lines.push(format!("route(s) {:?} are below the stop minimum", self.undersized_routes));
        }
        if !self.oversized_routes.is_empty() {
            lines.push(format!("route(s) {:?} are above the stop maximum", self.oversized_routes));
        }
        if !self.routes_with_repeats.is_empty() {
            lines.push(format!("route(s) {:?} visit a node more than once", self.routes_with_repeats));
        }
        if lines.is_empty() {
            lines.push("all constraints satisfied".to_string());
        }
        lines.join("\n")
    }
}

pub fn check_constraints(
    city: &CityGraph,
    net: &TransitNetwork,
    params: &ProblemParams,
) -> ConstraintReport {
    let mut conn = TransitConnectivity::build(city.n(), net.route_slices());
    let mut undersized = Vec::new();
    let mut oversized = Vec::new();
    let mut repeats = Vec::new();
    for (idx, route) in net.routes.iter().enumerate() {
        if route.len() < params.min_stops {
            undersized.push(idx);
        }
        if route.len() > params.max_stops {
            oversized.push(idx);
        }
        let mut seen = route.stops.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            repeats.push(idx);
        }
    }
    ConstraintReport {
        unconnected_demand_pairs: conn.count_unconnected(city),
        expected_routes: params.num_routes,
        actual_routes: net.routes.len(),
        undersized_routes: undersized,
        oversized_routes: oversized,
        routes_with_repeats: repeats,
    }
}

/// Everything one evaluation of a network produces. Times are in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub passenger_cost: f64,
    pub operator_cost: f64,
    pub constraint_cost: f64,
    pub frac_unconnected: f64,
    pub size_penalty: f64,
    pub total_cost: f64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_un: f64,
    pub num_routes: usize,
    /// All four constraints hold: demand connected, exact route count,
    /// route sizes in range, no node repeats.
    pub feasible: bool,
}

impl EvalResult {
    /// The search objective: total cost with the size-penalty share backed
    /// out, so partially built routes are not punished for being short.
    pub fn cost_prime(&self, beta: f64) -> f64 {
        self.total_cost - beta * self.size_penalty
    }
}

/// Reusable network evaluator. Construction validates the instance once so
/// evaluation itself cannot fail; buffers are recycled across calls.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    city: &'a CityGraph,
    pub params: ProblemParams,
    max_drive_time: f64,
    scratch: TripScratch,
}

impl<'a> Evaluator<'a> {
    pub fn new(city: &'a CityGraph, sp: &ShortestPathTable, params: ProblemParams) -> Result<Self> {
        params.validate()?;
        if city.total_demand() <= 0.0 {
            return Err(Error::Undefined(
                "city has zero total demand; passenger cost is undefined".into(),
            ));
        }
        if !sp.max_time().is_finite() || sp.max_time() <= 0.0 {
            return Err(Error::Undefined(format!(
                "longest inter-node drive time is {}, cannot normalize costs",
                sp.max_time()
            )));
        }
        Ok(Evaluator {
            city,
            params,
            max_drive_time: sp.max_time(),
            scratch: TripScratch::new(city.n()),
        })
    }

    pub fn city(&self) -> &'a CityGraph {
        self.city
    }

    pub fn max_drive_time(&self) -> f64 {
        self.max_drive_time
    }

    pub fn eval(&mut self, net: &TransitNetwork) -> EvalResult {
        let slices: Vec<&[usize]> = net.route_slices().collect();
        self.eval_routes(&slices)
    }

    /// Evaluates a route set given as raw stop slices (so in-progress
    /// construction states can be scored without building a network).
    pub fn eval_routes(&mut self, routes: &[&[usize]]) -> EvalResult {
        let n = self.city.n();
        let p_t = self.params.transfer_penalty;
        self.scratch.load(self.city, routes.iter().copied());

        let mut weighted_time = 0.0;
        let mut buckets = [0.0f64; 4];
        let mut unconnected_pairs = 0usize;
        for i in 0..n {
            self.scratch.search(i, p_t);
            for j in 0..n {
                let d = self.city.demand_at(i, j);
                if d == 0.0 {
                    continue;
                }
                match self.scratch.trip(j, p_t) {
                    Some((t, transfers)) => {
                        weighted_time += d * t;
                        buckets[(transfers as usize).min(3)] += d;
                    }
                    None => {
                        weighted_time += d * 2.0 * self.max_drive_time;
                        buckets[3] += d;
                        unconnected_pairs += 1;
                    }
                }
            }
        }

        let total_demand = self.city.total_demand();
        let cp = weighted_time / total_demand;
        let co: f64 = routes.iter().map(|r| route_time(self.city, r)).sum();
        let frac_unconnected = unconnected_pairs as f64 / self.city.demand_pairs() as f64;
        let sp_pen = size_penalty(routes.iter().map(|r| r.len()), &self.params);
        let cc = pack_constraint_cost(frac_unconnected, sp_pen);
        let total = combine_costs(cp, co, cc.total, self.max_drive_time, &self.params);

        let sizes_ok = routes
            .iter()
            .all(|r| r.len() >= self.params.min_stops && r.len() <= self.params.max_stops);
        let no_repeats = routes.iter().all(|r| {
            let mut seen = r.to_vec();
            seen.sort_unstable();
            seen.windows(2).all(|w| w[0] != w[1])
        });
        let scale = 100.0 / total_demand;
        EvalResult {
            passenger_cost: cp,
            operator_cost: co,
            constraint_cost: cc.total,
            frac_unconnected,
            size_penalty: sp_pen,
            total_cost: total,
            d0: buckets[0] * scale,
            d1: buckets[1] * scale,
            d2: buckets[2] * scale,
            d_un: buckets[3] * scale,
            num_routes: routes.len(),
            feasible: unconnected_pairs == 0
                && routes.len() == self.params.num_routes
                && sizes_ok
                && no_repeats,
        }
    }

    pub fn total_cost(&mut self, routes: &[&[usize]]) -> f64 {
        self.eval_routes(routes).total_cost
    }

    /// Search objective for construction: total cost minus the size-penalty
    /// share (routes still growing toward the minimum are not penalized).
    pub fn cost_prime(&mut self, routes: &[&[usize]]) -> f64 {
        let r = self.eval_routes(routes);
        r.cost_prime(self.params.beta)
    }
}
