//! Truncated stationary-distribution solvers.

use crate::error::{Error, Result};
use crate::market::{MarketParams, Policy};

use super::rates::transition_rates;
use super::{GridSpec, PoolDistribution};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Maximum boundary mass tolerated before the grid is declared too small.
    pub leak_threshold: f64,
    /// Max-norm bound on the stationary residual `pi Q`.
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            leak_threshold: 1e-6,
            residual_tol: 1e-11,
            max_iterations: 4_000_000,
        }
    }
}

/// Censored generator of the chain on the truncated grid, pre-scaled for
/// uniformized power iteration: `P = I + Q / lambda_unif`.
struct UniformizedChain {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    probs: Vec<f64>,
    stay_prob: Vec<f64>,
    lambda_unif: f64,
}

impl UniformizedChain {
    fn build(policy: Policy, params: MarketParams, grid: GridSpec) -> Self {
        let n = grid.n_states();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut rates = Vec::new();
        let mut out = vec![0.0; n];
        offsets.push(0u32);
        for (idx, total_out) in out.iter_mut().enumerate() {
            let (k, j) = grid.coords(idx);
            for entry in transition_rates(policy, params, (k, j)) {
                let (tk, tj) = entry.to;
                // Transitions leaving the grid are censored.
                if tk <= grid.a_max && tj <= grid.b_max {
                    targets.push(grid.index(tk, tj) as u32);
                    rates.push(entry.rate);
                    *total_out += entry.rate;
                }
            }
            offsets.push(targets.len() as u32);
        }
        let lambda_unif = out.iter().cloned().fold(f64::EPSILON, f64::max);
        let probs = rates.iter().map(|r| r / lambda_unif).collect();
        let stay_prob = out.iter().map(|o| 1.0 - o / lambda_unif).collect();
        UniformizedChain {
            offsets,
            targets,
            probs,
            stay_prob,
            lambda_unif,
        }
    }

    /// One step `next = pi P`; returns the max-norm of `next - pi`.
    fn step(&self, pi: &[f64], next: &mut [f64]) -> f64 {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (idx, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            next[idx] += mass * self.stay_prob[idx];
            let lo = self.offsets[idx] as usize;
            let hi = self.offsets[idx + 1] as usize;
            for e in lo..hi {
                next[self.targets[e] as usize] += mass * self.probs[e];
            }
        }
        pi.iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves `pi Q = 0`, `sum pi = 1` on the truncated grid by uniformized
/// power iteration. The boundary mass is reported as `leak` and checked
/// against the configured threshold.
pub fn stationary_distribution_opts(
    policy: Policy,
    params: MarketParams,
    grid: GridSpec,
    options: &SolveOptions,
) -> Result<PoolDistribution> {
    assert!(
        grid.a_max >= 1 && grid.b_max >= 1,
        "grid bounds must be >= 1"
    );
    let chain = UniformizedChain::build(policy, params, grid);
    let n = grid.n_states();
    let mut pi = vec![0.0; n];
    pi[grid.index(0, 0)] = 1.0;
    let mut next = vec![0.0; n];

    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;
    while iterations < options.max_iterations {
        let diff = chain.step(&pi, &mut next);
        std::mem::swap(&mut pi, &mut next);
        iterations += 1;
        // The one-step displacement is exactly pi Q / lambda_unif.
        residual = diff * chain.lambda_unif;
        if !residual.is_finite() {
            return Err(Error::SolverDiverged {
                iterations,
                residual,
            });
        }
        if residual <= options.residual_tol {
            break;
        }
        if iterations % 1024 == 0 {
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|x| *x /= total);
        }
    }
    if residual > options.residual_tol {
        return Err(Error::SolverDiverged {
            iterations,
            residual,
        });
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);

    let dist = PoolDistribution {
        grid,
        mass: pi,
        leak: 0.0,
        policy: Some(policy),
    };
    let leak = dist.boundary_mass();
    if leak > options.leak_threshold {
        return Err(Error::GridTooSmall {
            leak,
            threshold: options.leak_threshold,
            suggested_a: grid.a_max + grid.a_max / 2 + 1,
            suggested_b: grid.b_max + grid.b_max / 2 + 1,
        });
    }
    Ok(PoolDistribution { leak, ..dist })
}

/// [`stationary_distribution_opts`] with default options.
pub fn stationary_distribution(
    policy: Policy,
    params: MarketParams,
    grid: GridSpec,
) -> Result<PoolDistribution> {
    stationary_distribution_opts(policy, params, grid, &SolveOptions::default())
}

/// Exact path for small grids: dense Gaussian elimination on the censored
/// generator with the normalization row appended. Cross-checks the power
/// iteration; quadratic memory, so keep grids modest.
pub fn stationary_distribution_direct(
    policy: Policy,
    params: MarketParams,
    grid: GridSpec,
) -> Result<PoolDistribution> {
    let n = grid.n_states();
    assert!(n <= 2_700, "direct solve is meant for small grids");
    // Row-major system A x = b with A = Q^T, last row replaced by sum = 1.
    let mut a = vec![0.0f64; n * n];
    for idx in 0..n {
        let (k, j) = grid.coords(idx);
        for entry in transition_rates(policy, params, (k, j)) {
            let (tk, tj) = entry.to;
            if tk <= grid.a_max && tj <= grid.b_max {
                let t = grid.index(tk, tj);
                a[t * n + idx] += entry.rate;
                a[idx * n + idx] -= entry.rate;
            }
        }
    }
    let mut b = vec![0.0f64; n];
    for col in 0..n {
        a[(n - 1) * n + col] = 1.0;
    }
    b[n - 1] = 1.0;

    // Gaussian elimination with partial pivoting.
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1 * n + col].abs().total_cmp(&a[r2 * n + col].abs()))
            .unwrap();
        if a[pivot_row * n + col].abs() < 1e-300 {
            return Err(Error::SolverDiverged {
                iterations: col,
                residual: f64::INFINITY,
            });
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(col * n + c, pivot_row * n + c);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[row * n + c] -= factor * a[col * n + c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in (row + 1)..n {
            acc -= a[row * n + c] * x[c];
        }
        x[row] = acc / a[row * n + row];
    }
    // Tiny negative rounding is clipped before normalization.
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(PoolDistribution::from_mass(grid, x, Some(policy)))
}
