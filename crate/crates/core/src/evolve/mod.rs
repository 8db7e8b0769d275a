//! Evolutionary improvement of transit networks.
//!
//! A small population starts as copies of the best of many construction
//! rollouts. Each iteration runs a mutation stage (several passes in which
//! roughly half the population, in shuffled order, gets the heavy mutator —
//! route replacement or rollout-based rebuilding — and the rest get a light
//! one-stop tweak; a mutant replaces its parent only when strictly cheaper)
//! and then a selection stage (cost-scaled survival lottery; dropped members
//! are replaced by copies of surviving ones drawn by fitness).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::citygraph::{CityGraph, ShortestPathTable};
use crate::error::{Error, Result};
use crate::mdp::{build_route, lc_sample, MdpEnv, MdpState, Policy};
use crate::network::{EvalResult, Route, TransitNetwork};
use crate::rng::{substream, TAG_MUTATION, TAG_ORDER, TAG_SELECTION};

/// Which heavy mutator the first half of each mutation pass uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EaVariant {
    /// Replace a whole route with a demand-targeted shortest path.
    Ea,
    /// Delete a route and rebuild it with a construction rollout.
    Combine,
}

impl std::str::FromStr for EaVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ea" => Ok(EaVariant::Ea),
            "combine" => Ok(EaVariant::Combine),
            other => Err(Error::Format(format!(
                "unknown variant '{other}', expected 'ea' or 'combine'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EaParams {
    /// Population size.
    pub population: usize,
    pub iterations: usize,
    /// Mutation passes per iteration; every pass proposes one mutant per
    /// population member.
    pub mutations_per_stage: usize,
    /// Probability that the one-stop tweak deletes instead of adding.
    pub deletion_prob: f64,
    pub variant: EaVariant,
    /// Construction rollouts sampled for the initial population.
    pub init_samples: usize,
}

impl Default for EaParams {
    fn default() -> Self {
        EaParams {
            population: 10,
            iterations: 400,
            mutations_per_stage: 10,
            deletion_prob: 0.2,
            variant: EaVariant::Combine,
            init_samples: 100,
        }
    }
}

impl EaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(Error::Validation("population must be at least 1".into()));
        }
        if self.init_samples == 0 {
            return Err(Error::Validation("init_samples must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.deletion_prob) {
            return Err(Error::Validation(format!(
                "deletion_prob must be in [0, 1], got {}",
                self.deletion_prob
            )));
        }
        Ok(())
    }
}

/// A population member: a network and its cached evaluation.
#[derive(Debug, Clone)]
pub struct Member {
    pub network: TransitNetwork,
    pub result: EvalResult,
}

/// Counts of what a mutation stage proposed and kept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StageStats {
    pub proposals: usize,
    pub accepted: usize,
    /// Proposals from the heavy mutator (route replacement or rebuild).
    pub heavy: usize,
    /// Proposals from the one-stop tweak.
    pub light: usize,
    /// One-stop tweaks that drew the deletion branch.
    pub light_deletions: usize,
}

impl std::ops::AddAssign for StageStats {
    fn add_assign(&mut self, rhs: Self) {
        self.proposals += rhs.proposals;
        self.accepted += rhs.accepted;
        self.heavy += rhs.heavy;
        self.light += rhs.light;
        self.light_deletions += rhs.light_deletions;
    }
}

/// Replaces one route, chosen uniformly, with the shortest path from one of
/// its terminals to a node drawn with probability proportional to the demand
/// directly covered by that path (uniformly when no path covers any).
pub fn mutate_type1(
    city: &CityGraph,
    sp: &ShortestPathTable,
    net: &TransitNetwork,
    rng: &mut ChaCha8Rng,
) -> TransitNetwork {
    let mut out = net.clone();
    let ridx = rng.gen_range(0..out.routes.len());
    let route = &out.routes[ridx];
    let ends = [route.stops[0], *route.stops.last().unwrap()];
    let i = ends[rng.gen_range(0..2)];

    let n = city.n();
    let js: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let weights: Vec<f64> = js
        .iter()
        .map(|&j| {
            let path = sp.path(i, j);
            let mut covered = 0.0;
            let nodes: Vec<usize> = path.iter().collect();
            for (a, &k) in nodes.iter().enumerate() {
                for &l in &nodes[a + 1..] {
                    covered += city.demand_at(k, l) + city.demand_at(l, k);
                }
            }
            covered
        })
        .collect();

    let total: f64 = weights.iter().sum();
    let j = if total > 0.0 {
        let mut x = rng.gen_range(0.0..total);
        let mut pick = js.len() - 1;
        for (idx, w) in weights.iter().enumerate() {
            x -= w;
            if x < 0.0 {
                pick = idx;
                break;
            }
        }
        js[pick]
    } else {
        js[rng.gen_range(0..js.len())]
    };

    out.routes[ridx] = Route::new(sp.path(i, j).to_vec());
    out
}

/// Tweaks one route end: with `deletion_prob` drop a terminal (skipped at
/// the stop minimum), otherwise extend a terminal with a uniformly chosen
/// street neighbor not already on the route (skipped at the stop maximum or
/// when no such neighbor exists). Returns the mutant and whether the
/// deletion branch was drawn.
pub fn mutate_type2(
    city: &CityGraph,
    net: &TransitNetwork,
    min_stops: usize,
    max_stops: usize,
    deletion_prob: f64,
    rng: &mut ChaCha8Rng,
) -> (TransitNetwork, bool) {
    let mut out = net.clone();
    let ridx = rng.gen_range(0..out.routes.len());
    let delete = rng.gen_bool(deletion_prob);
    let at_front = rng.gen_range(0..2) == 0;
    let route = &mut out.routes[ridx].stops;

    if delete {
        if route.len() > min_stops {
            if at_front {
                route.remove(0);
            } else {
                route.pop();
            }
        }
    } else if route.len() < max_stops {
        let terminal = if at_front { route[0] } else { *route.last().unwrap() };
        let options: Vec<usize> = city
            .neighbors(terminal)
            .iter()
            .map(|&(v, _)| v)
            .filter(|v| !route.contains(v))
            .collect();
        if !options.is_empty() {
            let v = options[rng.gen_range(0..options.len())];
            if at_front {
                route.insert(0, v);
            } else {
                route.push(v);
            }
        }
    }
    (out, delete)
}

/// Deletes one route, chosen uniformly, and rebuilds a replacement with a
/// construction rollout over the remaining routes.
pub fn mutate_combine<P: Policy>(
    env: &MdpEnv,
    net: &TransitNetwork,
    policy: &mut P,
    rng: &mut ChaCha8Rng,
) -> TransitNetwork {
    let ridx = rng.gen_range(0..net.routes.len());
    let remaining: Vec<Vec<usize>> = net
        .routes
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != ridx)
        .map(|(_, r)| r.stops.clone())
        .collect();
    let mut state = MdpState::resume(remaining);
    build_route(env, &mut state, policy, rng);
    TransitNetwork::new(state.finished.into_iter().map(Route::new).collect())
}

/// One mutation stage: `mutations_per_stage` passes over the population in
/// shuffled order; slots in the first half of each pass use the heavy
/// mutator, the rest the one-stop tweak. A mutant replaces its parent only
/// when strictly cheaper. Proposal `(iteration, pass, slot)` draws from its
/// own substream, so outcomes are independent of thread count.
#[allow(clippy::too_many_arguments)]
pub fn mutation_stage<P>(
    env: &MdpEnv,
    population: &mut [Member],
    order: &mut Vec<usize>,
    policy: &P,
    ea: &EaParams,
    seed: u64,
    iteration: usize,
) -> StageStats
where
    P: Policy + Clone + Sync,
{
    let b = population.len();
    let heavy_slots = b.div_ceil(2);
    let mut stats = StageStats::default();
    for pass in 0..ea.mutations_per_stage {
        let mut order_rng = substream(seed, &[TAG_ORDER, iteration as u64, pass as u64]);
        order.shuffle(&mut order_rng);
        let proposals: Vec<(StageStats, Option<Member>)> = (0..b)
            .into_par_iter()
            .map_init(
                || env.evaluator(),
                |ev, slot| {
                    let member = &population[order[slot]];
                    let mut rng = substream(
                        seed,
                        &[TAG_MUTATION, iteration as u64, pass as u64, slot as u64],
                    );
                    let mut delta = StageStats { proposals: 1, ..Default::default() };
                    let mutant = if slot < heavy_slots {
                        delta.heavy = 1;
                        match ea.variant {
                            EaVariant::Ea => {
                                mutate_type1(env.city, env.sp, &member.network, &mut rng)
                            }
                            EaVariant::Combine => {
                                let mut pol = policy.clone();
                                mutate_combine(env, &member.network, &mut pol, &mut rng)
                            }
                        }
                    } else {
                        delta.light = 1;
                        let (mutant, deleted) = mutate_type2(
                            env.city,
                            &member.network,
                            env.params.min_stops,
                            env.params.max_stops,
                            ea.deletion_prob,
                            &mut rng,
                        );
                        if deleted {
                            delta.light_deletions = 1;
                        }
                        mutant
                    };
                    if mutant == member.network {
                        return (delta, None);
                    }
                    let result = ev.eval(&mutant);
                    if result.total_cost < member.result.total_cost {
                        delta.accepted = 1;
                        (delta, Some(Member { network: mutant, result }))
                    } else {
                        (delta, None)
                    }
                },
            )
            .collect();
        for (slot, (delta, update)) in proposals.into_iter().enumerate() {
            stats += delta;
            if let Some(member) = update {
                population[order[slot]] = member;
            }
        }
    }
    stats
}

/// One selection stage. Each member's overall fitness is its cost rescaled
/// onto [0, 1] (1 for the cheapest, 0 for the dearest; all 1 when costs are
/// equal); it survives with probability `1 - exp(-fitness)`, and dropped
/// members are replaced by copies of survivors drawn proportionally to
/// fitness. With no survivors the population is left unchanged. Returns the
/// survival mask.
pub fn selection_stage(population: &mut [Member], rng: &mut ChaCha8Rng) -> Vec<bool> {
    let costs: Vec<f64> = population.iter().map(|m| m.result.total_cost).collect();
    let cmax = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cmin = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let fitness: Vec<f64> = if cmax == cmin {
        vec![1.0; costs.len()]
    } else {
        costs.iter().map(|c| (cmax - c) / (cmax - cmin)).collect()
    };
    let survives: Vec<bool> = fitness.iter().map(|o| rng.gen_bool(1.0 - (-o).exp())).collect();
    if !survives.iter().any(|&s| s) {
        return survives;
    }
    let weights: Vec<f64> = fitness
        .iter()
        .zip(&survives)
        .map(|(o, &s)| if s { *o } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    for b in 0..population.len() {
        if survives[b] {
            continue;
        }
        let mut x = rng.gen_range(0.0..total);
        let mut pick = weights.len() - 1;
        for (idx, w) in weights.iter().enumerate() {
            x -= w;
            if x < 0.0 {
                pick = idx;
                break;
            }
        }
        population[b] = population[pick].clone();
    }
    survives
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub best: EvalResult,
}

#[derive(Debug, Clone)]
pub struct EaResult {
    pub network: TransitNetwork,
    pub result: EvalResult,
    /// Best-so-far after each iteration; row 0 is the initial network.
    pub history: Vec<HistoryRow>,
    pub stats: StageStats,
    /// Evaluation of the construction-sampled initial network.
    pub initial: EvalResult,
}

/// Runs the full optimizer: construction-sampled start, then `iterations`
/// rounds of mutation and selection. Fully determined by `seed`.
pub fn run_ea<P>(env: &MdpEnv, policy: &P, ea: &EaParams, seed: u64) -> Result<EaResult>
where
    P: Policy + Clone + Sync,
{
    ea.validate()?;
    let (init_net, init_res) = lc_sample(env, policy, ea.init_samples, seed);
    let mut population = vec![Member { network: init_net, result: init_res }; ea.population];
    let mut best = population[0].clone();
    let mut order: Vec<usize> = (0..ea.population).collect();
    let mut stats = StageStats::default();
    let mut history = Vec::with_capacity(ea.iterations + 1);
    history.push(HistoryRow { iteration: 0, best: best.result });

    for iteration in 1..=ea.iterations {
        stats += mutation_stage(env, &mut population, &mut order, policy, ea, seed, iteration);
        for m in &population {
            if m.result.total_cost < best.result.total_cost {
                best = m.clone();
            }
        }
        let mut rng = substream(seed, &[TAG_SELECTION, iteration as u64]);
        selection_stage(&mut population, &mut rng);
        history.push(HistoryRow { iteration, best: best.result });
    }
    Ok(EaResult {
        network: best.network,
        result: best.result,
        history,
        stats,
        initial: init_res,
    })
}
