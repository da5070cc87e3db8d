//! Pool-size Markov chains: transition rates, truncated stationary solves,
//! stationary loss functionals, and empirical distance to stationarity.
//!
//! Each policy induces a continuous-time chain on pool-size pairs `(k, j)`.
//! The chain is solved on a finite grid with out-of-grid transitions
//! censored; the probability still sitting on the grid boundary (`leak`) is
//! always reported so truncation error is visible rather than hidden.

mod empirical;
mod rates;
mod solve;

pub use empirical::{
    empirical_distribution, estimate_mixing_time, tv_sampling_floor, MixingEstimate,
};
pub use rates::{outflow, transition_rates, RateEntry};
pub use solve::{
    stationary_distribution, stationary_distribution_direct, stationary_distribution_opts,
    SolveOptions,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{MarketParams, Policy};

/// Truncation bounds of the state grid `{0..=a_max} x {0..=b_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub a_max: u32,
    pub b_max: u32,
}

impl GridSpec {
    pub fn new(a_max: u32, b_max: u32) -> Self {
        GridSpec { a_max, b_max }
    }

    pub fn n_states(&self) -> usize {
        (self.a_max as usize + 1) * (self.b_max as usize + 1)
    }

    #[inline]
    pub(crate) fn index(&self, k: u32, j: u32) -> usize {
        k as usize * (self.b_max as usize + 1) + j as usize
    }

    pub(crate) fn coords(&self, idx: usize) -> (u32, u32) {
        let w = self.b_max as usize + 1;
        ((idx / w) as u32, (idx % w) as u32)
    }
}

/// Grid large enough that boundary mass is negligible for well-behaved
/// parameterizations: pools rarely exceed the arrival rate by many standard
/// deviations, so `lambda + 10 sqrt(lambda + 1)` per side is a safe default.
pub fn default_grid(params: MarketParams) -> GridSpec {
    let bound = |lambda: f64| (lambda + 10.0 * (lambda + 1.0).sqrt()).ceil() as u32;
    GridSpec {
        a_max: bound(params.lambda_a()),
        b_max: bound(params.lambda_b()),
    }
}

/// Probability mass over a truncated pool-size grid, either a solved
/// stationary distribution or an empirical snapshot.
#[derive(Debug, Clone)]
pub struct PoolDistribution {
    pub grid: GridSpec,
    /// Row-major over `k`, then `j`.
    pub mass: Vec<f64>,
    /// Estimated probability outside (or pushed against) the grid: boundary
    /// mass for solved chains, observed out-of-grid fraction for histograms.
    pub leak: f64,
    /// Which policy's chain this distribution describes.
    pub policy: Option<Policy>,
}

impl PoolDistribution {
    /// Wraps raw mass, normalizing to total one.
    pub fn from_mass(grid: GridSpec, mass: Vec<f64>, policy: Option<Policy>) -> Self {
        assert_eq!(mass.len(), grid.n_states(), "mass length must match grid");
        let total: f64 = mass.iter().sum();
        let mass = if total > 0.0 {
            mass.iter().map(|m| m / total).collect()
        } else {
            mass
        };
        let mut dist = PoolDistribution {
            grid,
            mass,
            leak: 0.0,
            policy,
        };
        dist.leak = dist.boundary_mass();
        dist
    }

    /// Point mass at one state.
    pub fn point(grid: GridSpec, state: (u32, u32), policy: Option<Policy>) -> Self {
        let mut mass = vec![0.0; grid.n_states()];
        mass[grid.index(state.0, state.1)] = 1.0;
        PoolDistribution {
            grid,
            mass,
            leak: 0.0,
            policy,
        }
    }

    #[inline]
    pub fn prob(&self, k: u32, j: u32) -> f64 {
        self.mass[self.grid.index(k, j)]
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass sitting on the outermost grid rows/columns.
    pub fn boundary_mass(&self) -> f64 {
        let mut total = 0.0;
        for idx in 0..self.mass.len() {
            let (k, j) = self.grid.coords(idx);
            if k == self.grid.a_max || j == self.grid.b_max {
                total += self.mass[idx];
            }
        }
        total
    }

    /// Expectation of `f(k, j)` under the distribution.
    pub fn expect(&self, f: impl Fn(u32, u32) -> f64) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(idx, &m)| {
                let (k, j) = self.grid.coords(idx);
                m * f(k, j)
            })
            .sum()
    }

    /// Total mass on states where `pred(k, j)` holds.
    pub fn mass_where(&self, pred: impl Fn(u32, u32) -> bool) -> f64 {
        self.expect(|k, j| if pred(k, j) { 1.0 } else { 0.0 })
    }

    /// Serializes as `i,j,prob` rows (nonzero cells) with a trailing
    /// `# leak=<value>` comment line.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,prob")?;
        for idx in 0..self.mass.len() {
            if self.mass[idx] > 0.0 {
                let (k, j) = self.grid.coords(idx);
                writeln!(w, "{},{},{}", k, j, self.mass[idx])?;
            }
        }
        writeln!(w, "# leak={}", self.leak)
    }
}

/// Steady-state expectations and the loss they imply for a policy.
///
/// `e_a_geo`/`e_b_geo` are the survival-weighted pool sizes
/// `E[A (1-p)^B]` and `E[B (1-p)^A]`: the rate at which critical agents
/// perish for patient sides, where a critical agent escapes only if she has
/// at least one neighbor in the opposite pool.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StationaryFunctionals {
    pub e_a: f64,
    pub e_b: f64,
    pub e_a_geo: f64,
    pub e_b_geo: f64,
    pub loss_a: f64,
    pub loss_b: f64,
    pub loss_total: f64,
}

/// Loss functionals of `policy` evaluated on a distribution solved for the
/// same policy.
///
/// Greedy sides perish at rate equal to their pool size (`E[A]`, `E[B]`),
/// patient sides at the survival-weighted rate; the per-side loss divides by
/// the arrival rate. The 1-sided policies keep side U inactive: its agents
/// perish like a greedy side's under `Greedy1`/`Patient1`.
pub fn stationary_loss(
    policy: Policy,
    params: MarketParams,
    dist: &PoolDistribution,
) -> Result<StationaryFunctionals> {
    if dist.policy != Some(policy) {
        return Err(Error::PolicyMismatch {
            expected: policy,
            found: dist.policy,
        });
    }
    let e_a = dist.expect(|k, _| k as f64);
    let e_b = dist.expect(|_, j| j as f64);
    let e_a_geo = dist.expect(|k, j| k as f64 * params.survival(j as f64));
    let e_b_geo = dist.expect(|k, j| j as f64 * params.survival(k as f64));
    let (num_a, num_b) = match policy {
        Policy::Greedy2 | Policy::Greedy1 | Policy::Inactive => (e_a, e_b),
        Policy::Patient2 => (e_a_geo, e_b_geo),
        Policy::Patient1 => (e_a, e_b_geo),
    };
    let loss_a = num_a / params.lambda_a();
    let loss_b = num_b / params.lambda_b();
    Ok(StationaryFunctionals {
        e_a,
        e_b,
        e_a_geo,
        e_b_geo,
        loss_a,
        loss_b,
        loss_total: (params.lambda_a() * loss_a + params.lambda_b() * loss_b)
            / params.lambda_total(),
    })
}

/// Total variation distance, `0.5 * sum |p - q|`, with the leaked mass
/// treated as one extra outside cell. Note some conventions omit the `0.5`;
/// see [`tv_distance_unhalved`].
pub fn tv_distance(d1: &PoolDistribution, d2: &PoolDistribution) -> Result<f64> {
    if d1.grid != d2.grid {
        return Err(Error::GridMismatch {
            left_a: d1.grid.a_max,
            left_b: d1.grid.b_max,
            right_a: d2.grid.a_max,
            right_b: d2.grid.b_max,
        });
    }
    let cells: f64 = d1
        .mass
        .iter()
        .zip(&d2.mass)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(0.5 * (cells + (d1.leak - d2.leak).abs()))
}

/// The same sum of absolute differences without the `0.5` normalization,
/// for callers following the unhalved convention.
pub fn tv_distance_unhalved(d1: &PoolDistribution, d2: &PoolDistribution) -> Result<f64> {
    tv_distance(d1, d2).map(|tv| 2.0 * tv)
}

#[cfg(test)]
mod tests;
