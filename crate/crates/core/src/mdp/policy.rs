//! Construction policies: how a rollout picks among candidate extensions
//! and decides when a route is done.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::citygraph::CityGraph;
use crate::error::{Error, Result};
use crate::mdp::{Attach, Extension, HaltChoice, MdpEnv, MdpState};

pub trait Policy {
    /// Picks one of `candidates` (guaranteed non-empty); returns its index.
    fn choose_extension(
        &mut self,
        env: &MdpEnv,
        state: &MdpState,
        candidates: &[Extension],
        rng: &mut ChaCha8Rng,
    ) -> usize;

    /// Consulted only when both continuing and halting are legal.
    fn choose_halt(&mut self, env: &MdpEnv, state: &MdpState, rng: &mut ChaCha8Rng) -> HaltChoice;
}

/// Picks extensions uniformly and halts with probability one half. Cheap,
/// surprisingly strong as the rebuilding step inside evolutionary search.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPolicy;

impl Policy for UniformPolicy {
    fn choose_extension(
        &mut self,
        _env: &MdpEnv,
        _state: &MdpState,
        candidates: &[Extension],
        rng: &mut ChaCha8Rng,
    ) -> usize {
        rng.gen_range(0..candidates.len())
    }

    fn choose_halt(&mut self, _env: &MdpEnv, _state: &MdpState, rng: &mut ChaCha8Rng) -> HaltChoice {
        if rng.gen_bool(0.5) {
            HaltChoice::Halt
        } else {
            HaltChoice::Continue
        }
    }
}

/// Scores a directed node pair given the drive time between the two nodes
/// along the route being considered.
pub trait NodePairScorer {
    fn score(&self, i: usize, j: usize, route_time: f64) -> f64;
}

/// Scores a pair by its demand share: demand(i, j) / max demand.
#[derive(Debug, Clone, Copy)]
pub struct DemandScorer<'a> {
    city: &'a CityGraph,
}

impl<'a> DemandScorer<'a> {
    pub fn new(city: &'a CityGraph) -> Self {
        DemandScorer { city }
    }
}

impl NodePairScorer for DemandScorer<'_> {
    fn score(&self, i: usize, j: usize, _route_time: f64) -> f64 {
        let max = self.city.max_demand();
        if max > 0.0 {
            self.city.demand_at(i, j) / max
        } else {
            0.0
        }
    }
}

/// Fixed per-pair scores loaded from JSON: `{"n": 3, "scores": [[...], ...]}`.
/// Lets externally computed pair affinities drive construction.
#[derive(Debug, Clone)]
pub struct TableScorer {
    pub scores: Array2<f64>,
}

#[derive(Deserialize)]
struct TableJson {
    n: usize,
    scores: Vec<Vec<f64>>,
}

impl TableScorer {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: TableJson = serde_json::from_str(text)?;
        if raw.scores.len() != raw.n {
            return Err(Error::Format(format!(
                "score table declares n={} but has {} rows",
                raw.n,
                raw.scores.len()
            )));
        }
        let mut scores = Array2::zeros((raw.n, raw.n));
        for (i, row) in raw.scores.iter().enumerate() {
            if row.len() != raw.n {
                return Err(Error::Format(format!(
                    "score table row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    raw.n
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Format(format!(
                        "score table entry ({i}, {j}) is not finite"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::Format(format!(
                        "score table diagonal entry ({i}, {i}) must be 0, got {v}"
                    )));
                }
                scores[[i, j]] = v;
            }
        }
        Ok(TableScorer { scores })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn check_city(&self, city: &CityGraph) -> Result<()> {
        if self.scores.nrows() != city.n() {
            return Err(Error::Validation(format!(
                "score table is for {} nodes but the city has {}",
                self.scores.nrows(),
                city.n()
            )));
        }
        Ok(())
    }
}

impl NodePairScorer for TableScorer {
    fn score(&self, i: usize, j: usize, _route_time: f64) -> f64 {
        self.scores[[i, j]]
    }
}

/// Total score a candidate path contributes when attached to the current
/// route: every ordered pair inside the path, plus every pair between a
/// current-route node and a path node (both directions), each scored with
/// the drive time between the two nodes along the joined route. Pairs fully
/// inside the current route are unaffected by the choice and are left out.
pub fn extension_score<S: NodePairScorer>(
    scorer: &S,
    city: &CityGraph,
    current: &[usize],
    path: &[usize],
    attach: Attach,
) -> f64 {
    let joined: Vec<usize> = match attach {
        Attach::Append => current.iter().chain(path.iter()).copied().collect(),
        Attach::Prepend => path.iter().chain(current.iter()).copied().collect(),
    };
    let mut at = vec![0.0; joined.len()];
    for k in 1..joined.len() {
        at[k] = at[k - 1]
            + city
                .edge_time(joined[k - 1], joined[k])
                .expect("joined route stops must be street-adjacent");
    }
    let (p0, p1) = match attach {
        Attach::Append => (current.len(), joined.len()),
        Attach::Prepend => (0, path.len()),
    };
    let mut total = 0.0;
    for x in p0..p1 {
        for y in p0..p1 {
            if x != y {
                total += scorer.score(joined[x], joined[y], (at[x] - at[y]).abs());
            }
        }
    }
    for x in (0..joined.len()).filter(|x| *x < p0 || *x >= p1) {
        for y in p0..p1 {
            let t = (at[x] - at[y]).abs();
            total += scorer.score(joined[x], joined[y], t);
            total += scorer.score(joined[y], joined[x], t);
        }
    }
    total
}

/// Samples an index with probability proportional to `exp(score / temp)`.
pub fn softmax_sample(scores: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> usize {
    debug_assert!(!scores.is_empty());
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| ((s - m) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return rng.gen_range(0..scores.len());
    }
    let mut x = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        x -= w;
        if x < 0.0 {
            return i;
        }
    }
    scores.len() - 1
}

/// Softmax policy over pair-scorer aggregates; halting stays fifty-fifty.
#[derive(Debug, Clone)]
pub struct ScorePolicy<S> {
    pub scorer: S,
    pub temperature: f64,
}

impl<S: NodePairScorer> ScorePolicy<S> {
    pub fn new(scorer: S) -> Self {
        ScorePolicy { scorer, temperature: 1.0 }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }
}

impl<S: NodePairScorer> Policy for ScorePolicy<S> {
    fn choose_extension(
        &mut self,
        env: &MdpEnv,
        state: &MdpState,
        candidates: &[Extension],
        rng: &mut ChaCha8Rng,
    ) -> usize {
        if candidates.len() == 1 {
            return 0;
        }
        let scores: Vec<f64> = candidates
            .iter()
            .map(|e| {
                let path = env.sp.path(e.from, e.to).to_vec();
                extension_score(&self.scorer, env.city, &state.current, &path, e.attach)
            })
            .collect();
        softmax_sample(&scores, self.temperature, rng)
    }

    fn choose_halt(&mut self, _env: &MdpEnv, _state: &MdpState, rng: &mut ChaCha8Rng) -> HaltChoice {
        if rng.gen_bool(0.5) {
            HaltChoice::Halt
        } else {
            HaltChoice::Continue
        }
    }
}
