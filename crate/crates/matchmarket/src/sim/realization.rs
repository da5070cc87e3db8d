//! Generation of one fully realized market history.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::market::{MarketParams, Side};
use crate::rng::{derive_seed, pair_coin, stream_rng, Stream};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Spawn {
    pub side: Side,
    pub arrival: f64,
    pub criticality: f64,
}

/// Everything random about one market history: the merged arrival sequence
/// with per-agent lifetimes, plus the seed of the pair-keyed compatibility
/// coins. Ids are positions in arrival order.
#[derive(Debug, Clone)]
pub struct Realization {
    pub params: MarketParams,
    pub horizon: f64,
    pub seed: u64,
    pub(crate) agents: Vec<Spawn>,
    coin_seed: u64,
}

impl Realization {
    /// Hand-built history for tests exercising exact schedules.
    #[cfg(test)]
    pub(crate) fn from_spawns(
        params: MarketParams,
        horizon: f64,
        seed: u64,
        agents: Vec<Spawn>,
    ) -> Self {
        Self {
            params,
            horizon,
            seed,
            agents,
            coin_seed: derive_seed(seed, Stream::Coins),
        }
    }

    pub fn generate(params: MarketParams, horizon: f64, seed: u64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::HorizonNonPositive { value: horizon });
        }
        let side_u = side_arrivals(
            params.lambda_a(),
            horizon,
            seed,
            Stream::ArrivalsU,
            Stream::LifetimesU,
            Side::U,
        );
        let side_v = side_arrivals(
            params.lambda_b(),
            horizon,
            seed,
            Stream::ArrivalsV,
            Stream::LifetimesV,
            Side::V,
        );
        // Merge the two time-sorted sequences; ties (probability zero) break
        // toward side U so runs replay exactly.
        let mut agents = Vec::with_capacity(side_u.len() + side_v.len());
        let (mut i, mut j) = (0, 0);
        while i < side_u.len() || j < side_v.len() {
            let take_u = match (side_u.get(i), side_v.get(j)) {
                (Some(u), Some(v)) => u.arrival <= v.arrival,
                (Some(_), None) => true,
                _ => false,
            };
            if take_u {
                agents.push(side_u[i]);
                i += 1;
            } else {
                agents.push(side_v[j]);
                j += 1;
            }
        }
        Ok(Self {
            params,
            horizon,
            seed,
            agents,
            coin_seed: derive_seed(seed, Stream::Coins),
        })
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// The compatibility coin of an unordered opposite-side pair. Callers
    /// pass ids in either order.
    #[inline]
    pub(crate) fn coin(&self, id_x: u32, id_y: u32) -> bool {
        let (u, v) = if self.agents[id_x as usize].side == Side::U {
            (id_x, id_y)
        } else {
            (id_y, id_x)
        };
        pair_coin(self.coin_seed, u, v, self.params.p())
    }
}

fn side_arrivals(
    lambda: f64,
    horizon: f64,
    seed: u64,
    arrival_stream: Stream,
    lifetime_stream: Stream,
    side: Side,
) -> Vec<Spawn> {
    let mut arrival_rng = stream_rng(seed, arrival_stream);
    let mut lifetime_rng = stream_rng(seed, lifetime_stream);
    let gap = Exp::new(lambda).expect("validated positive rate");
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut arrival_rng);
        if t > horizon {
            return out;
        }
        // Exp(1) lifetime drawn at arrival.
        let lifetime: f64 = -(1.0 - lifetime_rng.gen::<f64>()).ln();
        out.push(Spawn {
            side,
            arrival: t,
            criticality: t + lifetime,
        });
    }
}
