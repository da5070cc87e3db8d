//! Transition rates of the pool-size chains.

use serde::Serialize;

use crate::market::{MarketParams, Policy};

/// One off-diagonal entry of the rate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEntry {
    pub from: (u32, u32),
    pub to: (u32, u32),
    pub rate: f64,
}

/// Outgoing transition rates from pool sizes `(k, j)` under `policy`.
///
/// Pools move by at most one per side per event. Arrivals raise a pool
/// unless the arriver matches instantly (greedy sides); departures lower a
/// pool when an agent perishes, is taken by a greedy arriver, or (for
/// patient policies) matches at her criticality instant, which lowers both
/// pools at once. Entries with zero rate (boundary states included) are
/// omitted.
pub fn transition_rates(policy: Policy, params: MarketParams, state: (u32, u32)) -> Vec<RateEntry> {
    let (k, j) = state;
    let lambda_a = params.lambda_a();
    let lambda_b = params.lambda_b();
    let kf = k as f64;
    let jf = j as f64;
    // Probability that a fixed agent has no neighbor across a pool of the
    // given size: (1-p)^size.
    let miss_k = params.survival(kf);
    let miss_j = params.survival(jf);

    let mut entries = Vec::with_capacity(5);
    let mut push = |to_k: i64, to_j: i64, rate: f64| {
        if rate > 0.0 && to_k >= 0 && to_j >= 0 {
            entries.push(RateEntry {
                from: (k, j),
                to: (to_k as u32, to_j as u32),
                rate,
            });
        }
    };
    let k_up = k as i64 + 1;
    let k_down = k as i64 - 1;
    let j_up = j as i64 + 1;
    let j_down = j as i64 - 1;
    let ki = k as i64;
    let ji = j as i64;

    match policy {
        Policy::Greedy2 => {
            push(k_up, ji, lambda_a * miss_j);
            push(ki, j_up, lambda_b * miss_k);
            push(k_down, ji, kf + lambda_b * (1.0 - miss_k));
            push(ki, j_down, jf + lambda_a * (1.0 - miss_j));
        }
        Policy::Patient2 => {
            push(k_up, ji, lambda_a);
            push(ki, j_up, lambda_b);
            push(k_down, ji, kf * miss_j);
            push(ki, j_down, jf * miss_k);
            push(k_down, j_down, kf * (1.0 - miss_j) + jf * (1.0 - miss_k));
        }
        Policy::Greedy1 => {
            push(k_up, ji, lambda_a);
            push(ki, j_up, lambda_b * miss_k);
            push(k_down, ji, kf + lambda_b * (1.0 - miss_k));
            push(ki, j_down, jf);
        }
        Policy::Patient1 => {
            push(k_up, ji, lambda_a);
            push(ki, j_up, lambda_b);
            push(k_down, ji, kf);
            push(k_down, j_down, jf * (1.0 - miss_k));
            push(ki, j_down, jf * miss_k);
        }
        Policy::Inactive => {
            push(k_up, ji, lambda_a);
            push(ki, j_up, lambda_b);
            push(k_down, ji, kf);
            push(ki, j_down, jf);
        }
    }
    entries
}

/// Total outflow rate from a state (sum of emitted entries).
pub fn outflow(policy: Policy, params: MarketParams, state: (u32, u32)) -> f64 {
    transition_rates(policy, params, state)
        .iter()
        .map(|e| e.rate)
        .sum()
}
