//! Transit network design: given a city's street graph and an
//! origin–destination demand matrix, find a fixed number of bus routes that
//! trade passenger travel time against operator cost under route-size and
//! connectivity constraints.
//!
//! The pieces, bottom to top:
//!
//! * [`citygraph`] — problem instances: street graph, demand matrix,
//!   all-pairs shortest drive paths, file formats, and a synthetic-city
//!   generator for benchmarking at controlled sizes.
//! * [`network`] — candidate solutions (route sets), the transit trip table
//!   (minimum generalized travel time with transfer penalties), and the full
//!   cost model with its constraint terms.
//! * [`mdp`] — sequential route construction: build routes one shortest-path
//!   segment at a time, with a pluggable [`mdp::Policy`] choosing among
//!   candidate extensions and halt decisions.
//! * [`evolve`] — the evolutionary optimizer that seeds a population from
//!   construction rollouts and improves it with route-level mutators.
//! * [`rng`] — deterministic seeding; every stochastic stage draws from a
//!   tagged substream so results are reproducible and independent of thread
//!   count.

pub mod citygraph;
pub mod error;
pub mod evolve;
pub mod mdp;
pub mod network;
pub mod rng;

pub use error::{Error, Result};
