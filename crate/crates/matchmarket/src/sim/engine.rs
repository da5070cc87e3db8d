//! Event loop executing one policy against a realization.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::market::{MatchTiming, Policy, Side};
use crate::rng::{stream_rng, Stream};
use crate::sim::realization::Realization;
use crate::sim::{Agent, EventLog, Outcome};

/// Mutable per-run state. Pools are dense vectors with a position index so
/// membership updates and uniform sampling are O(1).
struct MarketState {
    present: Vec<bool>,
    /// Heads-coin neighbors currently co-present in the pool.
    adjacency: Vec<Vec<u32>>,
    pool: [Vec<u32>; 2],
    position: Vec<u32>,
    /// Live edge count inside the pool; must stay zero under 2-sided greedy.
    pool_edges: usize,
}

impl MarketState {
    fn new(n: usize) -> Self {
        MarketState {
            present: vec![false; n],
            adjacency: vec![Vec::new(); n],
            pool: [Vec::new(), Vec::new()],
            position: vec![u32::MAX; n],
            pool_edges: 0,
        }
    }

    fn pool_of(&self, side: Side) -> &Vec<u32> {
        &self.pool[side as usize]
    }

    fn insert(&mut self, id: u32, side: Side) {
        let pool = &mut self.pool[side as usize];
        self.position[id as usize] = pool.len() as u32;
        pool.push(id);
        self.present[id as usize] = true;
    }

    fn remove(&mut self, id: u32, side: Side) {
        let pool = &mut self.pool[side as usize];
        let pos = self.position[id as usize] as usize;
        pool.swap_remove(pos);
        if let Some(&moved) = pool.get(pos) {
            self.position[moved as usize] = pos as u32;
        }
        self.position[id as usize] = u32::MAX;
        self.present[id as usize] = false;
        // Drop the departing agent from every live neighbor list.
        let neighbors = std::mem::take(&mut self.adjacency[id as usize]);
        for y in neighbors {
            let list = &mut self.adjacency[y as usize];
            if let Some(k) = list.iter().position(|&z| z == id) {
                list.swap_remove(k);
                self.pool_edges -= 1;
            }
        }
    }

    fn link(&mut self, x: u32, y: u32) {
        self.adjacency[x as usize].push(y);
        self.adjacency[y as usize].push(x);
        self.pool_edges += 1;
    }
}

pub(crate) fn execute(realization: &Realization, policy: Policy) -> EventLog {
    let spawns = &realization.agents;
    let n = spawns.len();
    let mut outcome = vec![Outcome::Remaining; n];
    let mut state = MarketState::new(n);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut choices = stream_rng(
        realization.seed,
        Stream::Choices {
            policy_tag: policy as u64,
        },
    );

    // Events ordered by (time, insertion sequence). Arrivals use their id as
    // the sequence; criticalities get later sequence numbers as they are
    // scheduled. Positive f64 times order correctly as raw bits.
    let mut crit_heap: BinaryHeap<Reverse<(u64, u64, u32)>> = BinaryHeap::new();
    let mut next_seq = n as u64;
    let mut next_arrival = 0usize;
    let mut neighbors_buf: Vec<u32> = Vec::new();

    loop {
        let arrival_key = (next_arrival < n).then(|| {
            (
                spawns[next_arrival].arrival.to_bits(),
                next_arrival as u64,
                next_arrival as u32,
            )
        });
        let crit_key = crit_heap.peek().map(|Reverse(k)| *k);
        let take_arrival = match (arrival_key, crit_key) {
            (Some(a), Some(c)) => a < c,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };

        if take_arrival {
            let id = next_arrival as u32;
            next_arrival += 1;
            let spawn = spawns[id as usize];
            // Flip the compatibility coin against every co-present agent of
            // the other side.
            neighbors_buf.clear();
            for &y in state.pool_of(spawn.side.opposite()) {
                if realization.coin(id, y) {
                    neighbors_buf.push(y);
                    edges.push(ordered_pair(spawn.side, id, y));
                }
            }
            let matched_now =
                policy.timing(spawn.side) == MatchTiming::AtArrival && !neighbors_buf.is_empty();
            if matched_now {
                let partner = choose(&mut choices, &neighbors_buf);
                outcome[id as usize] = Outcome::Matched {
                    partner,
                    time: spawn.arrival,
                };
                outcome[partner as usize] = Outcome::Matched {
                    partner: id,
                    time: spawn.arrival,
                };
                state.remove(partner, spawn.side.opposite());
            } else {
                state.insert(id, spawn.side);
                let buf = std::mem::take(&mut neighbors_buf);
                for &y in &buf {
                    state.link(id, y);
                }
                neighbors_buf = buf;
                if spawn.criticality <= realization.horizon {
                    crit_heap.push(Reverse((spawn.criticality.to_bits(), next_seq, id)));
                    next_seq += 1;
                }
            }
        } else {
            let Reverse((_, _, id)) = crit_heap.pop().expect("peeked");
            if !state.present[id as usize] {
                continue; // left earlier by matching
            }
            let spawn = spawns[id as usize];
            let can_match = policy.timing(spawn.side) == MatchTiming::AtCriticality
                && !state.adjacency[id as usize].is_empty();
            if can_match {
                let partner = choose(&mut choices, &state.adjacency[id as usize]);
                outcome[id as usize] = Outcome::Matched {
                    partner,
                    time: spawn.criticality,
                };
                outcome[partner as usize] = Outcome::Matched {
                    partner: id,
                    time: spawn.criticality,
                };
                state.remove(id, spawn.side);
                state.remove(partner, spawn.side.opposite());
            } else {
                outcome[id as usize] = Outcome::Perished;
                state.remove(id, spawn.side);
            }
        }

        debug_assert!(
            policy != Policy::Greedy2 || state.pool_edges == 0,
            "2-sided greedy pool must stay edge-free"
        );
    }

    let agents = spawns
        .iter()
        .enumerate()
        .map(|(id, spawn)| Agent {
            id: id as u32,
            side: spawn.side,
            arrival_time: spawn.arrival,
            criticality_time: spawn.criticality,
            outcome: outcome[id],
        })
        .collect();

    EventLog {
        params: realization.params,
        policy,
        omniscient: false,
        horizon: realization.horizon,
        seed: realization.seed,
        agents,
        edges,
        pool_snapshots: None,
    }
}

fn ordered_pair(side_of_first: Side, first: u32, second: u32) -> (u32, u32) {
    match side_of_first {
        Side::U => (first, second),
        Side::V => (second, first),
    }
}

fn choose(rng: &mut ChaCha12Rng, candidates: &[u32]) -> u32 {
    candidates[rng.gen_range(0..candidates.len())]
}
