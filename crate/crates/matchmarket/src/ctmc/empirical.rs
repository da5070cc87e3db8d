//! Empirical pool-size distributions and mixing-time estimation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{MarketParams, Policy};
use crate::sim;

use super::solve::stationary_distribution;
use super::{tv_distance, GridSpec, PoolDistribution};

/// Histogram of `(A_t, B_t)` over `n_reps` independent trajectories,
/// truncated to `grid`; out-of-grid observations are counted into `leak`.
pub fn empirical_distribution(
    params: MarketParams,
    policy: Policy,
    t: f64,
    n_reps: u32,
    seed: u64,
    grid: GridSpec,
) -> Result<PoolDistribution> {
    if n_reps == 0 {
        return Err(Error::NoReplications);
    }
    let samples = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let rep_seed = sim::replication_seed(seed, i);
            let (log, _) = sim::sample_trajectory(params, policy, t, rep_seed)?;
            Ok(log.pool_sizes_at(&[t])?[0])
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mass = vec![0.0; grid.n_states()];
    let mut outside = 0u64;
    for s in &samples {
        if s.a <= grid.a_max && s.b <= grid.b_max {
            mass[grid.index(s.a, s.b)] += 1.0;
        } else {
            outside += 1;
        }
    }
    let total = n_reps as f64;
    mass.iter_mut().for_each(|m| *m /= total);
    Ok(PoolDistribution {
        grid,
        mass,
        leak: outside as f64 / total,
        policy: Some(policy),
    })
}

/// An empirical mixing-time estimate on a geometric time grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MixingEstimate {
    /// First sampled time at which the empirical distribution came within
    /// `epsilon` of stationary.
    pub time: f64,
    /// Spacing of the time grid around the reported time; the estimate is
    /// only resolved up to this much.
    pub resolution: f64,
    /// Total variation observed at `time`.
    pub tv: f64,
    pub n_reps: u32,
}

const MIXING_T0: f64 = 0.25;
const MIXING_STAGES: u32 = 13; // geometric grid up to 1024 time units

/// Smallest time on a geometric grid at which the empirical distribution of
/// `(A_t, B_t)` is within `epsilon` total variation of the solved
/// stationary distribution.
///
/// The estimate is purely empirical: it inherits the multinomial sampling
/// noise of `n_reps` draws, so `epsilon` should sit well above that noise
/// floor for a stable answer.
pub fn estimate_mixing_time(
    params: MarketParams,
    policy: Policy,
    epsilon: f64,
    n_reps: u32,
    seed: u64,
    grid: GridSpec,
) -> Result<MixingEstimate> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::EpsilonOutOfRange { value: epsilon });
    }
    if epsilon >= 1.0 {
        // Any distribution qualifies.
        return Ok(MixingEstimate {
            time: 0.0,
            resolution: 0.0,
            tv: 1.0,
            n_reps,
        });
    }
    let stationary = stationary_distribution(policy, params, grid)?;
    let mut best = (f64::INFINITY, 0.0f64);
    let mut prev_t = 0.0;
    for stage in 0..MIXING_STAGES {
        let t = MIXING_T0 * (1u64 << stage) as f64;
        // A fresh batch of trajectories per stage; stage-tagged seeds keep
        // batches independent.
        let stage_seed = crate::rng::mix64(seed ^ (0x5431 + stage as u64));
        let empirical = empirical_distribution(params, policy, t, n_reps, stage_seed, grid)?;
        let tv = tv_distance(&empirical, &stationary)?;
        if tv < best.0 {
            best = (tv, t);
        }
        if tv <= epsilon {
            return Ok(MixingEstimate {
                time: t,
                resolution: t - prev_t,
                tv,
                n_reps,
            });
        }
        prev_t = t;
    }
    Err(Error::NotConvergedWithinBudget {
        epsilon,
        budget: MIXING_T0 * (1u64 << (MIXING_STAGES - 1)) as f64,
        best_tv: best.0,
        best_time: best.1,
    })
}

/// Expected total-variation distance between the true distribution and an
/// `n`-sample histogram of it: the sampling noise floor below which an
/// empirical TV cannot be expected to fall. Normal approximation of the
/// per-cell binomial deviations.
pub fn tv_sampling_floor(dist: &PoolDistribution, n: u32) -> f64 {
    let n = n as f64;
    0.5 * dist
        .mass
        .iter()
        .map(|&p| {
            let normal = (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n)).sqrt();
            // Cells with expected count below one deviate by at most ~2p.
            normal.min(2.0 * p)
        })
        .sum::<f64>()
}
