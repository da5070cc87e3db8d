//! Simulation and steady-state analysis of dynamic bipartite matching markets.
//!
//! Agents of two types arrive by independent Poisson processes with rates
//! `lambda_a` and `lambda_b`, stay for an Exp(1) lifetime, and are compatible
//! with each agent of the other type independently with probability `p`.
//! A matching policy decides which compatible pairs to match and, crucially,
//! *when*: greedy agents match on arrival, patient agents at the instant
//! their lifetime expires, inactive agents never initiate.
//!
//! The crate provides three coordinated views of the same market:
//!
//! * [`sim`]: an exact discrete-event simulator for any [`market::Policy`],
//!   including an omniscient offline benchmark (maximum matching on the fully
//!   realized compatibility graph) and coupled runs that share all randomness
//!   across policies for pathwise comparisons.
//! * [`ctmc`]: the pool-size continuous-time Markov chain of each policy
//!   with its transition rates, truncated stationary-distribution solves,
//!   stationary loss functionals, and empirical distance-to-stationarity
//!   estimates.
//! * [`bounds`]: characteristic pool sizes (roots of `x + r(1-(1-p)^x) = s`)
//!   and closed-form upper/lower bounds on the loss of every policy.
//!
//! [`diagnostics`] cross-checks the three views: tail-mass concentration of
//! solved stationary distributions, probability-flux balance across state
//! cuts, and simulation-versus-chain loss consistency.

pub mod bounds;
pub mod ctmc;
pub mod diagnostics;
mod error;
pub mod market;
pub mod rng;
pub mod runtime;
pub mod sim;

pub use error::{Error, Result};
pub use market::{Densities, MarketParams, Policy, Side};
