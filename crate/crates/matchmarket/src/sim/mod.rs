//! Exact discrete-event simulation of the market in continuous time.
//!
//! A [`Realization`] fixes everything random about one market history:
//! arrival times, lifetimes, and the per-pair compatibility coins. Executing
//! a policy against a realization is then deterministic up to the policy's
//! own tie-break stream, which is what makes coupled policy comparisons and
//! the omniscient benchmark exact pathwise statements rather than
//! distributional ones.

mod engine;
mod hopcroft_karp;
mod realization;

pub use hopcroft_karp::maximum_bipartite_matching;
pub use realization::Realization;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{MarketParams, Policy, Side};
use crate::rng::{derive_seed, Stream};

/// How an agent ultimately left the market (or didn't).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Outcome {
    /// Matched to `partner` at `time`; both left instantly.
    Matched { partner: u32, time: f64 },
    /// Reached her criticality instant unmatched and left alone.
    Perished,
    /// Still in the pool when the horizon closed.
    Remaining,
}

/// One agent of a realized market history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agent {
    pub id: u32,
    pub side: Side,
    pub arrival_time: f64,
    /// Arrival plus the Exp(1) lifetime drawn at arrival.
    pub criticality_time: f64,
    pub outcome: Outcome,
}

impl Agent {
    /// Departure instant implied by the outcome; `None` while still present
    /// at the horizon.
    pub fn departure_time(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Matched { time, .. } => Some(time),
            Outcome::Perished => Some(self.criticality_time),
            Outcome::Remaining => None,
        }
    }

    /// Whether the agent is in the pool at time `t`.
    pub fn present_at(&self, t: f64) -> bool {
        self.arrival_time <= t && self.departure_time().map_or(true, |d| t < d)
    }
}

/// Pool sizes observed at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoolSample {
    pub time: f64,
    pub a: u32,
    pub b: u32,
}

/// Full realized trajectory of one run.
#[derive(Debug, Clone)]
pub struct EventLog {
    pub params: MarketParams,
    pub policy: Policy,
    /// True when the matching was chosen offline by the omniscient
    /// benchmark rather than by `policy`.
    pub omniscient: bool,
    pub horizon: f64,
    pub seed: u64,
    pub agents: Vec<Agent>,
    /// Every compatibility coin that came up heads between co-present
    /// agents, as `(side-U id, side-V id)` pairs.
    pub edges: Vec<(u32, u32)>,
    pub pool_snapshots: Option<Vec<PoolSample>>,
}

impl EventLog {
    /// Exact pool sizes at each requested time, reconstructed from the log.
    pub fn pool_sizes_at(&self, sample_times: &[f64]) -> Result<Vec<PoolSample>> {
        for &t in sample_times {
            if !(0.0..=self.horizon).contains(&t) {
                return Err(Error::TimeOutOfRange {
                    time: t,
                    horizon: self.horizon,
                });
            }
        }
        Ok(sample_times
            .iter()
            .map(|&t| {
                let mut a = 0;
                let mut b = 0;
                for agent in &self.agents {
                    if agent.present_at(t) {
                        match agent.side {
                            Side::U => a += 1,
                            Side::V => b += 1,
                        }
                    }
                }
                PoolSample { time: t, a, b }
            })
            .collect())
    }

    /// Samples pool sizes at the given times and stores them on the log.
    pub fn record_snapshots(&mut self, sample_times: &[f64]) -> Result<()> {
        self.pool_snapshots = Some(self.pool_sizes_at(sample_times)?);
        Ok(())
    }

    /// Structural sanity of the realized trajectory. Checks the exact
    /// per-side conservation identity, that matches form a matching between
    /// compatible co-present agents, and (for the 2-sided greedy policy)
    /// that no recorded edge ever connected two agents that went on to sit
    /// in the pool together unmatched.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut matched_with = vec![None::<u32>; self.agents.len()];
        for agent in &self.agents {
            if let Outcome::Matched { partner, time } = agent.outcome {
                if matched_with[agent.id as usize].is_some() {
                    return Err(format!("agent {} matched twice", agent.id));
                }
                matched_with[agent.id as usize] = Some(partner);
                let other = &self.agents[partner as usize];
                if other.side == agent.side {
                    return Err(format!("agents {} and {} share a side", agent.id, partner));
                }
                match other.outcome {
                    Outcome::Matched {
                        partner: q,
                        time: t2,
                    } if q == agent.id && t2 == time => {}
                    _ => return Err(format!("asymmetric match {} -> {}", agent.id, partner)),
                }
                if !(agent.arrival_time <= time
                    && time <= agent.criticality_time
                    && time <= self.horizon)
                {
                    return Err(format!(
                        "match time {time} outside presence of {}",
                        agent.id
                    ));
                }
                let (u, v) = match agent.side {
                    Side::U => (agent.id, partner),
                    Side::V => (partner, agent.id),
                };
                if !self.edges.contains(&(u, v)) {
                    return Err(format!("match ({u}, {v}) has no recorded edge"));
                }
            }
        }
        let mut counts = SideCounts::default();
        counts.absorb(self);
        for (side, c) in [(Side::U, &counts.u), (Side::V, &counts.v)] {
            if c.perished + c.matched + c.remaining != c.arrived {
                return Err(format!("conservation violated on side {side:?}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct OneSide {
    arrived: u64,
    matched: u64,
    perished: u64,
    remaining: u64,
    perished_in_window: u64,
}

#[derive(Debug, Default, Clone, Copy)]
struct SideCounts {
    u: OneSide,
    v: OneSide,
    window_start: f64,
}

impl SideCounts {
    fn absorb(&mut self, log: &EventLog) {
        for agent in &log.agents {
            let c = match agent.side {
                Side::U => &mut self.u,
                Side::V => &mut self.v,
            };
            c.arrived += 1;
            match agent.outcome {
                Outcome::Matched { .. } => c.matched += 1,
                Outcome::Remaining => c.remaining += 1,
                Outcome::Perished => {
                    c.perished += 1;
                    if agent.criticality_time >= self.window_start {
                        c.perished_in_window += 1;
                    }
                }
            }
        }
    }
}

/// Per-side and total loss estimates with uncertainty.
///
/// Counts cover the full run (and sum over replications); the loss fields
/// estimate the perish rate over `[burn_in, horizon]` normalized by the
/// expected arrivals `lambda * (horizon - burn_in)`, which for `burn_in = 0`
/// is exactly the perished-fraction estimator. Standard errors are zero for
/// a single run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossReport {
    pub loss_a: f64,
    pub loss_b: f64,
    pub loss_total: f64,
    pub se_a: f64,
    pub se_b: f64,
    pub se_total: f64,
    pub arrived_a: u64,
    pub arrived_b: u64,
    pub matched_a: u64,
    pub matched_b: u64,
    pub perished_a: u64,
    pub perished_b: u64,
    pub remaining_a: u64,
    pub remaining_b: u64,
    /// Set when a side saw no arrivals at all; that side's loss is reported
    /// as zero rather than NaN.
    pub zero_denominator: bool,
    pub replications: u32,
    pub burn_in: f64,
}

impl LossReport {
    /// Loss accounting for a single realized trajectory, discarding perish
    /// events before `burn_in`.
    pub fn from_log(log: &EventLog, burn_in: f64) -> Result<LossReport> {
        if !(0.0..log.horizon).contains(&burn_in) {
            return Err(Error::BurnInTooLarge {
                burn_in,
                horizon: log.horizon,
            });
        }
        let mut counts = SideCounts {
            window_start: burn_in,
            ..SideCounts::default()
        };
        counts.absorb(log);
        let window = log.horizon - burn_in;
        let lambda_a = log.params.lambda_a();
        let lambda_b = log.params.lambda_b();
        let loss_a = counts.u.perished_in_window as f64 / (lambda_a * window);
        let loss_b = counts.v.perished_in_window as f64 / (lambda_b * window);
        Ok(LossReport {
            loss_a,
            loss_b,
            loss_total: (lambda_a * loss_a + lambda_b * loss_b) / (lambda_a + lambda_b),
            se_a: 0.0,
            se_b: 0.0,
            se_total: 0.0,
            arrived_a: counts.u.arrived,
            arrived_b: counts.v.arrived,
            matched_a: counts.u.matched,
            matched_b: counts.v.matched,
            perished_a: counts.u.perished,
            perished_b: counts.v.perished,
            remaining_a: counts.u.remaining,
            remaining_b: counts.v.remaining,
            zero_denominator: counts.u.arrived == 0 || counts.v.arrived == 0,
            replications: 1,
            burn_in,
        })
    }

    /// Mean and standard error over independent replications. Counts sum.
    pub fn aggregate(reports: &[LossReport]) -> Result<LossReport> {
        if reports.is_empty() {
            return Err(Error::NoReplications);
        }
        let n = reports.len() as f64;
        let mean = |f: &dyn Fn(&LossReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let se = |f: &dyn Fn(&LossReport) -> f64, m: f64| {
            if reports.len() < 2 {
                return 0.0;
            }
            let var = reports.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        let (la, lb, lt): (f64, f64, f64) = (
            mean(&|r: &LossReport| r.loss_a),
            mean(&|r: &LossReport| r.loss_b),
            mean(&|r: &LossReport| r.loss_total),
        );
        let sum = |f: &dyn Fn(&LossReport) -> u64| reports.iter().map(f).sum::<u64>();
        Ok(LossReport {
            loss_a: la,
            loss_b: lb,
            loss_total: lt,
            se_a: se(&|r: &LossReport| r.loss_a, la),
            se_b: se(&|r: &LossReport| r.loss_b, lb),
            se_total: se(&|r: &LossReport| r.loss_total, lt),
            arrived_a: sum(&|r: &LossReport| r.arrived_a),
            arrived_b: sum(&|r: &LossReport| r.arrived_b),
            matched_a: sum(&|r: &LossReport| r.matched_a),
            matched_b: sum(&|r: &LossReport| r.matched_b),
            perished_a: sum(&|r: &LossReport| r.perished_a),
            perished_b: sum(&|r: &LossReport| r.perished_b),
            remaining_a: sum(&|r: &LossReport| r.remaining_a),
            remaining_b: sum(&|r: &LossReport| r.remaining_b),
            zero_denominator: reports.iter().any(|r| r.zero_denominator),
            replications: reports.len() as u32,
            burn_in: reports[0].burn_in,
        })
    }
}

/// Simulates one trajectory of `policy` over `[0, horizon]`.
///
/// Deterministic given `(params, policy, horizon, seed)`.
pub fn sample_trajectory(
    params: MarketParams,
    policy: Policy,
    horizon: f64,
    seed: u64,
) -> Result<(EventLog, LossReport)> {
    let realization = Realization::generate(params, horizon, seed)?;
    let log = engine::execute(&realization, policy);
    let report = LossReport::from_log(&log, 0.0)?;
    Ok((log, report))
}

/// Monte Carlo estimate over `n_reps` independent trajectories.
///
/// Replication `i` runs on the root seed for `i = 0` (so a single
/// replication reproduces [`sample_trajectory`] exactly) and on derived
/// substream seeds afterwards. Replications run in parallel; aggregation
/// order is fixed, so the result is deterministic.
pub fn run_replications(
    params: MarketParams,
    policy: Policy,
    horizon: f64,
    n_reps: u32,
    seed: u64,
) -> Result<LossReport> {
    run_replications_windowed(params, policy, horizon, 0.0, n_reps, seed)
}

/// [`run_replications`] discarding perish events before `burn_in`, for
/// comparisons against steady-state functionals.
pub fn run_replications_windowed(
    params: MarketParams,
    policy: Policy,
    horizon: f64,
    burn_in: f64,
    n_reps: u32,
    seed: u64,
) -> Result<LossReport> {
    if n_reps == 0 {
        return Err(Error::NoReplications);
    }
    let reports = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let rep_seed = replication_seed(seed, i);
            let realization = Realization::generate(params, horizon, rep_seed)?;
            let log = engine::execute(&realization, policy);
            LossReport::from_log(&log, burn_in)
        })
        .collect::<Result<Vec<_>>>()?;
    LossReport::aggregate(&reports)
}

/// Seed of replication `index` under root `seed`: the root itself for the
/// first replication, derived substream seeds afterwards.
pub fn replication_seed(seed: u64, index: u32) -> u64 {
    if index == 0 {
        seed
    } else {
        derive_seed(
            seed,
            Stream::Replication {
                index: index as u64,
            },
        )
    }
}

/// Offline benchmark: a maximum-cardinality matching on the fully realized
/// compatibility graph of the no-matching trajectory.
///
/// Agent presence intervals are those of the inactive run; a pair is
/// compatible when its intervals overlap and its coin came up heads. Agents
/// left unmatched by the maximum matching perish if their interval ends
/// before the horizon.
pub fn omniscient_loss(
    params: MarketParams,
    horizon: f64,
    seed: u64,
) -> Result<(EventLog, LossReport)> {
    let realization = Realization::generate(params, horizon, seed)?;
    omniscient_on(&realization)
}

pub(crate) fn omniscient_on(realization: &Realization) -> Result<(EventLog, LossReport)> {
    let mut log = engine::execute(realization, Policy::Inactive);
    let n = log.agents.len();
    // Contiguous per-side indices for the matching routine.
    let mut left_of = vec![u32::MAX; n];
    let mut right_of = vec![u32::MAX; n];
    let mut left_ids = Vec::new();
    let mut right_ids = Vec::new();
    for agent in &log.agents {
        match agent.side {
            Side::U => {
                left_of[agent.id as usize] = left_ids.len() as u32;
                left_ids.push(agent.id);
            }
            Side::V => {
                right_of[agent.id as usize] = right_ids.len() as u32;
                right_ids.push(agent.id);
            }
        }
    }
    let edges: Vec<(u32, u32)> = log
        .edges
        .iter()
        .map(|&(u, v)| (left_of[u as usize], right_of[v as usize]))
        .collect();
    let matching = maximum_bipartite_matching(left_ids.len(), right_ids.len(), &edges);
    for (li, ri) in matching {
        let u = left_ids[li as usize] as usize;
        let v = right_ids[ri as usize] as usize;
        let time = log.agents[u].arrival_time.max(log.agents[v].arrival_time);
        log.agents[u].outcome = Outcome::Matched {
            partner: v as u32,
            time,
        };
        log.agents[v].outcome = Outcome::Matched {
            partner: u as u32,
            time,
        };
    }
    log.omniscient = true;
    let report = LossReport::from_log(&log, 0.0)?;
    Ok((log, report))
}

/// Runs every policy in `policies` against the identical realization
/// (same arrivals, lifetimes, and compatibility coins), enabling pathwise
/// comparisons such as pool-size dominance against the inactive run.
pub fn coupled_run(
    params: MarketParams,
    horizon: f64,
    seed: u64,
    policies: &[Policy],
) -> Result<Vec<(EventLog, LossReport)>> {
    if policies.is_empty() {
        return Err(Error::EmptyPolicyList);
    }
    let realization = Realization::generate(params, horizon, seed)?;
    policies
        .iter()
        .map(|&policy| {
            let log = engine::execute(&realization, policy);
            let report = LossReport::from_log(&log, 0.0)?;
            Ok((log, report))
        })
        .collect()
}

/// Free-function form of [`EventLog::pool_sizes_at`].
pub fn pool_size_timeseries(log: &EventLog, sample_times: &[f64]) -> Result<Vec<PoolSample>> {
    log.pool_sizes_at(sample_times)
}
