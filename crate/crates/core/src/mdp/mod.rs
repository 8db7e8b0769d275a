//! Network construction as a sequential decision process.
//!
//! A network is built route by route. Odd steps extend the route in
//! progress with a whole shortest path (a fresh route starts from any
//! shortest path short enough to fit; a non-empty route attaches a path at
//! either end through a street edge, without revisiting its nodes). Even
//! steps decide between continuing and finishing the route, under rules
//! that make every finished network structurally sound: routes below the
//! stop minimum must continue while any extension exists, and routes at the
//! stop maximum — or with nothing left to attach — must halt. The episode
//! ends when the required number of routes is built.
//!
//! Rewards are drops in the search objective (total cost with the
//! size-penalty share removed), so a full episode's rewards telescope from
//! the empty network's objective down to the final one's.

mod connect;
pub mod policy;

pub use connect::ConnectivityFilter;
pub use policy::{
    extension_score, softmax_sample, DemandScorer, NodePairScorer, Policy, ScorePolicy,
    TableScorer, UniformPolicy,
};

use std::borrow::Cow;

use ordered_float::OrderedFloat;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::citygraph::{CityGraph, ProblemParams, ShortestPathTable};
use crate::error::{Error, Result};
use crate::network::{EvalResult, Evaluator, Route, TransitNetwork};
use crate::rng::{substream, TAG_LC};

/// Which end of the route in progress a path attaches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attach {
    /// The path's first node follows the route's last node.
    Append,
    /// The path's last node precedes the route's first node.
    Prepend,
}

/// A candidate extension: the shortest path from `from` to `to`, attached
/// in that orientation. For a fresh route the attachment is irrelevant and
/// the path itself becomes the route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Extension {
    pub from: usize,
    pub to: usize,
    pub attach: Attach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Extend(Extension),
    Continue,
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltChoice {
    Continue,
    Halt,
}

/// Legal choices at a halt-decision step. At least one side is always true.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaltOptions {
    pub can_continue: bool,
    pub can_halt: bool,
    /// The route is still below the stop minimum but nothing can extend it,
    /// so halting is forced anyway.
    pub forced_short_halt: bool,
}

/// Construction state: finished routes, the route in progress, and a step
/// counter whose parity selects the step kind (odd extends, even decides).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpState {
    pub finished: Vec<Vec<usize>>,
    pub current: Vec<usize>,
    pub t: usize,
}

impl MdpState {
    pub fn new() -> Self {
        MdpState { finished: Vec::new(), current: Vec::new(), t: 1 }
    }

    /// A state ready to build one more route on top of existing ones; the
    /// step counter restarts, only its parity matters.
    pub fn resume(finished: Vec<Vec<usize>>) -> Self {
        MdpState { finished, current: Vec::new(), t: 1 }
    }

    pub fn is_extend_step(&self) -> bool {
        self.t % 2 == 1
    }

    /// Finished routes plus the route in progress, as evaluation input.
    pub fn route_slices(&self) -> Vec<&[usize]> {
        let mut slices: Vec<&[usize]> = self.finished.iter().map(|r| r.as_slice()).collect();
        if !self.current.is_empty() {
            slices.push(&self.current);
        }
        slices
    }
}

impl Default for MdpState {
    fn default() -> Self {
        MdpState::new()
    }
}

pub struct MdpEnv<'a> {
    pub city: &'a CityGraph,
    pub sp: &'a ShortestPathTable,
    pub params: ProblemParams,
    /// Steer construction toward connecting stranded demand: while any
    /// demand-positive pair lacks a transit path, extension steps keep only
    /// candidates that newly connect demand (when any exists) and
    /// halt-decision steps keep continuing (when legal).
    pub enforce_connectivity: bool,
    fresh: Vec<Extension>,
}

impl<'a> MdpEnv<'a> {
    pub fn new(
        city: &'a CityGraph,
        sp: &'a ShortestPathTable,
        params: ProblemParams,
    ) -> Result<Self> {
        Evaluator::new(city, sp, params)?;
        let mut fresh = Vec::new();
        for i in 0..city.n() {
            for j in (i + 1)..city.n() {
                if sp.path_len(i, j) <= params.max_stops {
                    fresh.push(Extension { from: i, to: j, attach: Attach::Append });
                }
            }
        }
        if fresh.is_empty() {
            return Err(Error::Validation(format!(
                "no shortest path has at most {} stops; no route can be started",
                params.max_stops
            )));
        }
        Ok(MdpEnv { city, sp, params, enforce_connectivity: false, fresh })
    }

    /// A ready evaluator for this instance (validated at construction).
    pub fn evaluator(&self) -> Evaluator<'a> {
        Evaluator::new(self.city, self.sp, self.params).expect("validated at construction")
    }

    pub fn initial_state(&self) -> MdpState {
        MdpState::new()
    }

    pub fn is_terminal(&self, state: &MdpState) -> bool {
        state.finished.len() >= self.params.num_routes && state.current.is_empty()
    }

    /// Every way to start a fresh route.
    pub fn fresh_extensions(&self) -> &[Extension] {
        &self.fresh
    }

    /// Extension candidates for the state's route in progress, before any
    /// connectivity steering. Empty-route states get the fresh candidates.
    pub fn extensions(&self, state: &MdpState) -> Cow<'_, [Extension]> {
        if state.current.is_empty() {
            Cow::Borrowed(&self.fresh)
        } else {
            let mut out = Vec::new();
            self.route_extensions(&state.current, &mut out);
            Cow::Owned(out)
        }
    }

    fn route_extensions(&self, current: &[usize], out: &mut Vec<Extension>) {
        let budget = self.params.max_stops.saturating_sub(current.len());
        if budget < 2 {
            return;
        }
        let n = self.city.n();
        let mut on_route = vec![false; n];
        for &v in current {
            on_route[v] = true;
        }
        let ends = [
            (Attach::Append, *current.last().unwrap()),
            (Attach::Prepend, current[0]),
        ];
        for (attach, anchor) in ends {
            for &(v, _) in self.city.neighbors(anchor) {
                if on_route[v] {
                    continue;
                }
                for w in 0..n {
                    if w == v || on_route[w] {
                        continue;
                    }
                    let (from, to) = match attach {
                        Attach::Append => (v, w),
                        Attach::Prepend => (w, v),
                    };
                    let path = self.sp.path(from, to);
                    if path.len() > budget {
                        continue;
                    }
                    if path.iter().any(|x| on_route[x]) {
                        continue;
                    }
                    out.push(Extension { from, to, attach });
                }
            }
        }
    }

    /// The active connectivity steer, if any: present only when steering is
    /// on and some demand-positive pair is still unconnected.
    pub fn connectivity(&self, state: &MdpState) -> Option<ConnectivityFilter> {
        if !self.enforce_connectivity {
            return None;
        }
        let slices = state.route_slices();
        let filter = ConnectivityFilter::build(self.city, slices.iter().copied());
        if filter.unconnected_demand_exists() {
            Some(filter)
        } else {
            None
        }
    }

    /// Candidates that would newly connect demand; `None` when none would
    /// (the caller then falls back to the unfiltered set).
    fn connecting_subset(
        &self,
        state: &MdpState,
        exts: &[Extension],
        filter: &ConnectivityFilter,
    ) -> Option<Vec<Extension>> {
        let anchor = state.current.first().copied();
        let kept: Vec<Extension> = exts
            .iter()
            .filter(|e| filter.reduces(self.city, self.sp.path(e.from, e.to).iter(), anchor))
            .copied()
            .collect();
        if kept.is_empty() {
            None
        } else {
            Some(kept)
        }
    }

    /// The action set at an extension step, with connectivity steering
    /// applied when active.
    pub fn allowed_extensions(&self, state: &MdpState) -> Vec<Extension> {
        let exts = self.extensions(state);
        if let Some(filter) = self.connectivity(state) {
            if let Some(kept) = self.connecting_subset(state, &exts, &filter) {
                return kept;
            }
        }
        exts.into_owned()
    }

    /// Halt-decision rule from raw ingredients; `ext_count` counts the
    /// unfiltered extensions available if the route were to continue.
    pub fn halt_options(
        &self,
        current_len: usize,
        ext_count: usize,
        must_connect: bool,
    ) -> HaltOptions {
        let mut o = if current_len < self.params.min_stops {
            if ext_count > 0 {
                HaltOptions { can_continue: true, can_halt: false, forced_short_halt: false }
            } else {
                HaltOptions { can_continue: false, can_halt: true, forced_short_halt: true }
            }
        } else if current_len >= self.params.max_stops || ext_count == 0 {
            HaltOptions { can_continue: false, can_halt: true, forced_short_halt: false }
        } else {
            HaltOptions { can_continue: true, can_halt: true, forced_short_halt: false }
        };
        if must_connect && o.can_continue && o.can_halt {
            o.can_halt = false;
        }
        o
    }

    /// Legal choices at the state's halt-decision step.
    pub fn halt_choices(&self, state: &MdpState) -> HaltOptions {
        let ext_count = self.extensions(state).len();
        let must_connect = self.connectivity(state).is_some();
        self.halt_options(state.current.len(), ext_count, must_connect)
    }

    /// Applies an action, trusting its legality (debug builds assert step
    /// parity). Use [`MdpEnv::try_apply`] for untrusted input.
    pub fn apply(&self, state: &mut MdpState, action: &Action) {
        match action {
            Action::Extend(e) => {
                debug_assert!(state.is_extend_step(), "extension on a halt-decision step");
                let path = self.sp.path(e.from, e.to);
                match e.attach {
                    Attach::Append => state.current.extend(path.iter()),
                    Attach::Prepend => {
                        let mut stops: Vec<usize> = path.iter().collect();
                        stops.extend_from_slice(&state.current);
                        state.current = stops;
                    }
                }
            }
            Action::Continue => {
                debug_assert!(!state.is_extend_step() && !state.current.is_empty());
            }
            Action::Halt => {
                debug_assert!(!state.is_extend_step() && !state.current.is_empty());
                let done = std::mem::take(&mut state.current);
                state.finished.push(done);
            }
        }
        state.t += 1;
    }

    /// Applies an action after checking it is legal in this state.
    pub fn try_apply(&self, state: &mut MdpState, action: &Action) -> Result<()> {
        if self.is_terminal(state) {
            return Err(Error::IllegalAction("the episode is already complete".into()));
        }
        match action {
            Action::Extend(e) => {
                if !state.is_extend_step() {
                    return Err(Error::IllegalAction(format!(
                        "step {} decides halt/continue, not an extension",
                        state.t
                    )));
                }
                if !self.allowed_extensions(state).contains(e) {
                    return Err(Error::IllegalAction(format!(
                        "path {}->{} ({:?}) is not a legal extension here",
                        e.from, e.to, e.attach
                    )));
                }
            }
            Action::Continue => {
                if state.is_extend_step() {
                    return Err(Error::IllegalAction(format!(
                        "step {} extends the route, not halt/continue",
                        state.t
                    )));
                }
                if !self.halt_choices(state).can_continue {
                    return Err(Error::IllegalAction(
                        "continuing is not legal for this route".into(),
                    ));
                }
            }
            Action::Halt => {
                if state.is_extend_step() {
                    return Err(Error::IllegalAction(format!(
                        "step {} extends the route, not halt/continue",
                        state.t
                    )));
                }
                if !self.halt_choices(state).can_halt {
                    return Err(Error::IllegalAction(
                        "halting is not legal for this route".into(),
                    ));
                }
            }
        }
        self.apply(state, action);
        Ok(())
    }

    /// Applies an action and returns its reward: the drop in the search
    /// objective for extensions, zero for halt/continue.
    pub fn step_rewarded(
        &self,
        state: &mut MdpState,
        action: &Action,
        ev: &mut Evaluator,
    ) -> f64 {
        match action {
            Action::Extend(_) => {
                let before = ev.cost_prime(&state.route_slices());
                self.apply(state, action);
                let after = ev.cost_prime(&state.route_slices());
                before - after
            }
            _ => {
                self.apply(state, action);
                0.0
            }
        }
    }
}

struct RewardTape<'e, 'c> {
    ev: &'e mut Evaluator<'c>,
    rewards: Vec<f64>,
    cost_prime: f64,
}

fn build_route_inner<P: Policy + ?Sized>(
    env: &MdpEnv,
    state: &mut MdpState,
    policy: &mut P,
    rng: &mut ChaCha8Rng,
    mut tape: Option<&mut RewardTape>,
) {
    debug_assert!(
        state.is_extend_step() && state.current.is_empty() && !env.is_terminal(state),
        "route building starts on an extension step with an empty route"
    );
    let mut unfiltered = env.extensions(state);
    let mut filter = env.connectivity(state);
    loop {
        // Extension step.
        let chosen = {
            let connecting = filter
                .as_ref()
                .and_then(|f| env.connecting_subset(state, &unfiltered, f));
            let candidates: &[Extension] = connecting.as_deref().unwrap_or(&unfiltered);
            debug_assert!(!candidates.is_empty(), "extension step with no candidates");
            let idx = if candidates.len() == 1 {
                0
            } else {
                policy.choose_extension(env, state, candidates, rng)
            };
            candidates[idx]
        };
        env.apply(state, &Action::Extend(chosen));
        if let Some(t) = tape.as_deref_mut() {
            let after = t.ev.cost_prime(&state.route_slices());
            t.rewards.push(t.cost_prime - after);
            t.cost_prime = after;
        }

        // Halt-decision step. The candidate set computed here is reused by
        // the next extension step, since continuing changes nothing.
        unfiltered = env.extensions(state);
        filter = env.connectivity(state);
        let options = env.halt_options(state.current.len(), unfiltered.len(), filter.is_some());
        if options.forced_short_halt {
            log::warn!(
                "route {} halts at {} stop(s), below the minimum of {}: nothing can extend it",
                state.finished.len(),
                state.current.len(),
                env.params.min_stops
            );
        }
        let choice = if !options.can_halt {
            HaltChoice::Continue
        } else if !options.can_continue {
            HaltChoice::Halt
        } else {
            policy.choose_halt(env, state, rng)
        };
        match choice {
            HaltChoice::Continue => {
                env.apply(state, &Action::Continue);
                if let Some(t) = tape.as_deref_mut() {
                    t.rewards.push(0.0);
                }
            }
            HaltChoice::Halt => {
                env.apply(state, &Action::Halt);
                if let Some(t) = tape.as_deref_mut() {
                    t.rewards.push(0.0);
                }
                break;
            }
        }
    }
}

/// Builds one complete route onto `state` (which must sit at the start of
/// a fresh route) using the policy.
pub fn build_route<P: Policy>(
    env: &MdpEnv,
    state: &mut MdpState,
    policy: &mut P,
    rng: &mut ChaCha8Rng,
) {
    build_route_inner(env, state, policy, rng, None);
}

/// Runs a full construction episode and returns the finished network.
pub fn rollout<P: Policy>(env: &MdpEnv, policy: &mut P, rng: &mut ChaCha8Rng) -> TransitNetwork {
    let mut state = env.initial_state();
    while !env.is_terminal(&state) {
        build_route_inner(env, &mut state, policy, rng, None);
    }
    TransitNetwork::new(state.finished.into_iter().map(Route::new).collect())
}

/// A full episode with its reward sequence. `rewards` has one entry per
/// step; extension entries telescope: summing them walks the search
/// objective from `initial_cost_prime` down to `final_cost_prime`.
#[derive(Debug, Clone)]
pub struct RolloutTrace {
    pub network: TransitNetwork,
    pub rewards: Vec<f64>,
    pub initial_cost_prime: f64,
    pub final_cost_prime: f64,
}

pub fn rollout_recorded<P: Policy>(
    env: &MdpEnv,
    policy: &mut P,
    ev: &mut Evaluator,
    rng: &mut ChaCha8Rng,
) -> RolloutTrace {
    let mut state = env.initial_state();
    let initial_cost_prime = ev.cost_prime(&state.route_slices());
    let mut tape = RewardTape { ev, rewards: Vec::new(), cost_prime: initial_cost_prime };
    while !env.is_terminal(&state) {
        build_route_inner(env, &mut state, policy, rng, Some(&mut tape));
    }
    let final_cost_prime = tape.cost_prime;
    let rewards = tape.rewards;
    RolloutTrace {
        network: TransitNetwork::new(state.finished.into_iter().map(Route::new).collect()),
        rewards,
        initial_cost_prime,
        final_cost_prime,
    }
}

/// Best of `samples` independent rollouts by total cost. Sample `k` draws
/// from the substream `(seed, [TAG_LC, k])`, so results do not depend on
/// thread count or scheduling.
pub fn lc_sample<P>(
    env: &MdpEnv,
    policy: &P,
    samples: usize,
    seed: u64,
) -> (TransitNetwork, EvalResult)
where
    P: Policy + Clone + Sync,
{
    assert!(samples > 0, "need at least one sample");
    let (_, _, net, res) = (0..samples)
        .into_par_iter()
        .map_init(
            || env.evaluator(),
            |ev, k| {
                let mut rng = substream(seed, &[TAG_LC, k as u64]);
                let mut pol = policy.clone();
                let net = rollout(env, &mut pol, &mut rng);
                let res = ev.eval(&net);
                (OrderedFloat(res.total_cost), k, net, res)
            },
        )
        .min_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)))
        .expect("samples > 0");
    (net, res)
}
