//! Statistical and numerical verification of solved distributions against
//! concentration regions, flux-balance identities, and simulation.
//!
//! The concentration statements bound tail probabilities only up to
//! unspecified leading constants, so these checks are evidence with a
//! configurable pass threshold (default 0.1 at the
//! `sqrt(lambda ln lambda)` deviation scale), not proofs.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::RootSet;
use crate::ctmc::{
    stationary_distribution, stationary_loss, transition_rates, GridSpec, PoolDistribution,
    StationaryFunctionals,
};
use crate::error::{Error, Result};
use crate::market::{MarketParams, Policy};
use crate::sim::{self, LossReport, PoolSample};

/// Default pass threshold for measured tail masses.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 0.1;

/// One measured tail or region mass.
#[derive(Debug, Clone, Serialize)]
pub struct TailCheck {
    pub id: &'static str,
    /// Human-readable description of the measured region.
    pub region: String,
    pub tail_mass: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Reason the check was skipped (out-of-regime gate), if it was.
    pub skipped: Option<String>,
}

impl TailCheck {
    fn measured(id: &'static str, region: String, tail_mass: f64, threshold: f64) -> Self {
        TailCheck {
            id,
            region,
            tail_mass,
            threshold,
            pass: tail_mass < threshold,
            skipped: None,
        }
    }

    fn skipped(id: &'static str, reason: String) -> Self {
        TailCheck {
            id,
            region: String::new(),
            tail_mass: 0.0,
            threshold: 0.0,
            pass: true,
            skipped: Some(reason),
        }
    }
}

/// Concentration checks of one policy at one parameterization.
#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub policy: Policy,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub p: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub threshold: f64,
    pub leak: f64,
    pub entries: Vec<TailCheck>,
}

impl ConcentrationReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

fn require_policy(dist: &PoolDistribution, policy: Policy) -> Result<()> {
    if dist.policy != Some(policy) {
        return Err(Error::PolicyMismatch {
            expected: policy,
            found: dist.policy,
        });
    }
    Ok(())
}

/// Upper tails of the 2-sided greedy pools: mass at `A >= k2 + sigma + 1`
/// and `B >= l2 + sigma + 1`.
pub fn check_greedy2_tails(
    dist: &PoolDistribution,
    roots: &RootSet,
    sigma: f64,
    threshold: f64,
) -> Result<Vec<TailCheck>> {
    require_policy(dist, Policy::Greedy2)?;
    let a_cut = roots.k2 + sigma + 1.0;
    let b_cut = roots.l2 + sigma + 1.0;
    Ok(vec![
        TailCheck::measured(
            "greedy2_tail_a",
            format!("A >= {a_cut:.2}"),
            dist.mass_where(|k, _| k as f64 >= a_cut),
            threshold,
        ),
        TailCheck::measured(
            "greedy2_tail_b",
            format!("B >= {b_cut:.2}"),
            dist.mass_where(|_, j| j as f64 >= b_cut),
            threshold,
        ),
    ])
}

/// Concentration of the 2-sided patient pools: mass outside the box
/// `[k2_lower - sigma_a, lambda_a + sigma_a] x [l2_lower - sigma_b,
/// lambda_b + sigma_b]`, the lower tail of the pool-size sum, and (for
/// balanced markets with `d >= 3`, `p < 1/10`) the upper tail of the
/// pool-size difference at offset `sigma_d`.
pub fn check_patient2_region(
    params: MarketParams,
    dist: &PoolDistribution,
    roots: &RootSet,
    sigma_a: f64,
    sigma_b: f64,
    sigma_d: f64,
    threshold: f64,
) -> Result<Vec<TailCheck>> {
    require_policy(dist, Policy::Patient2)?;
    let (la, lb) = (params.lambda_a(), params.lambda_b());
    let (a_lo, a_hi) = (roots.k2_lower - sigma_a, la + sigma_a);
    let (b_lo, b_hi) = (roots.l2_lower - sigma_b, lb + sigma_b);
    let mut entries = vec![TailCheck::measured(
        "patient2_outside_box",
        format!("(A, B) outside [{a_lo:.2}, {a_hi:.2}] x [{b_lo:.2}, {b_hi:.2}]"),
        dist.mass_where(|k, j| {
            let (k, j) = (k as f64, j as f64);
            k < a_lo || k > a_hi || j < b_lo || j > b_hi
        }),
        threshold,
    )];

    let sum_cut = (la + lb) / 2.0 - 2.0 - sigma_a.max(sigma_b) - 1.0;
    entries.push(TailCheck::measured(
        "patient2_sum_lower_tail",
        format!("A + B <= {sum_cut:.2}"),
        dist.mass_where(|k, j| (k + j) as f64 <= sum_cut),
        threshold,
    ));

    let dens = params.densities();
    let balanced_ok = dens.d_a == dens.d_b && dens.d_a >= 3.0 && params.p() < 0.1 && sigma_a <= la;
    if balanced_ok {
        let diff_cut = (la + sigma_a) / 2.0 + sigma_d;
        entries.push(TailCheck::measured(
            "patient2_diff_upper_tail",
            format!("A - B >= {diff_cut:.2}"),
            dist.mass_where(|k, j| k as f64 - j as f64 >= diff_cut),
            threshold,
        ));
    } else {
        entries.push(TailCheck::skipped(
            "patient2_diff_upper_tail",
            "requires a balanced market with d >= 3, p < 1/10, sigma_a <= lambda_a".to_string(),
        ));
    }
    Ok(entries)
}

/// Concentration of the 1-sided pools. For the greedy variant: upper and
/// lower tails of the inactive pool around `k1` and the upper tail of the
/// active pool above `l1`. For the patient variant: mass outside the box
/// `[k1_lower - sigma_a, k1_upper + sigma_a] x [lambda_b - sigma_b,
/// lambda_b + sigma_b]`.
pub fn check_1sided_regions(
    params: MarketParams,
    dist: &PoolDistribution,
    roots: &RootSet,
    policy: Policy,
    sigma_a: f64,
    sigma_b: f64,
    threshold: f64,
) -> Result<Vec<TailCheck>> {
    require_policy(dist, policy)?;
    match policy {
        Policy::Greedy1 => {
            let hi_cut = roots.k1 + sigma_a + 1.0;
            let lo_cut = roots.k1 - sigma_a - 1.0;
            let b_cut = roots.l1 + sigma_b + 1.0;
            Ok(vec![
                TailCheck::measured(
                    "greedy1_tail_a_high",
                    format!("A >= {hi_cut:.2}"),
                    dist.mass_where(|k, _| k as f64 >= hi_cut),
                    threshold,
                ),
                TailCheck::measured(
                    "greedy1_tail_a_low",
                    format!("A <= {lo_cut:.2}"),
                    dist.mass_where(|k, _| k as f64 <= lo_cut),
                    threshold,
                ),
                TailCheck::measured(
                    "greedy1_tail_b",
                    format!("B >= {b_cut:.2}"),
                    dist.mass_where(|_, j| j as f64 >= b_cut),
                    threshold,
                ),
            ])
        }
        Policy::Patient1 => {
            let Some(k1_upper) = roots.k1_upper else {
                return Ok(vec![TailCheck::skipped(
                    "patient1_outside_box",
                    format!("sigma_b = {sigma_b} >= lambda_b leaves the box undefined"),
                )]);
            };
            assert!(
                roots.k1_lower < roots.k1 && roots.k1 < k1_upper,
                "shifted roots must straddle k1"
            );
            let lb = params.lambda_b();
            let (a_lo, a_hi) = (roots.k1_lower - sigma_a, k1_upper + sigma_a);
            let (b_lo, b_hi) = (lb - sigma_b, lb + sigma_b);
            Ok(vec![TailCheck::measured(
                "patient1_outside_box",
                format!("(A, B) outside [{a_lo:.2}, {a_hi:.2}] x [{b_lo:.2}, {b_hi:.2}]"),
                dist.mass_where(|k, j| {
                    let (k, j) = (k as f64, j as f64);
                    k < a_lo || k > a_hi || j < b_lo || j > b_hi
                }),
                threshold,
            )])
        }
        other => Err(Error::PolicyMismatch {
            expected: Policy::Greedy1,
            found: Some(other),
        }),
    }
}

/// Runs every concentration check that applies to `policy` on a freshly
/// solved stationary distribution.
pub fn concentration_report(
    params: MarketParams,
    policy: Policy,
    grid: GridSpec,
    sigma_a: Option<f64>,
    sigma_b: Option<f64>,
    threshold: f64,
) -> Result<ConcentrationReport> {
    let sigma_a = sigma_a.unwrap_or_else(|| crate::bounds::default_sigma(params.lambda_a()));
    let sigma_b = sigma_b.unwrap_or_else(|| crate::bounds::default_sigma(params.lambda_b()));
    let roots = crate::bounds::solve_rootset_with(params, sigma_a, sigma_b);
    let dist = stationary_distribution(policy, params, grid)?;
    let entries = match policy {
        Policy::Greedy2 => check_greedy2_tails(&dist, &roots, sigma_a, threshold)?,
        Policy::Patient2 => {
            let sigma_d = params.lambda_a().ln().max(1.0);
            check_patient2_region(params, &dist, &roots, sigma_a, sigma_b, sigma_d, threshold)?
        }
        Policy::Greedy1 | Policy::Patient1 => {
            check_1sided_regions(params, &dist, &roots, policy, sigma_a, sigma_b, threshold)?
        }
        Policy::Inactive => Vec::new(),
    };
    Ok(ConcentrationReport {
        policy,
        lambda_a: params.lambda_a(),
        lambda_b: params.lambda_b(),
        p: params.p(),
        sigma_a,
        sigma_b,
        threshold,
        leak: dist.leak,
        entries,
    })
}

/// Worst absolute probability-flux imbalance across each cut family.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CutResiduals {
    /// Cuts `{(i, j) : i <= c}` for every `c`.
    pub vertical_max: f64,
    /// Cuts `{(i, j) : j <= c}`.
    pub horizontal_max: f64,
    /// Cuts `{(i, j) : i + j <= c}`; only meaningful for the 2-sided
    /// patient chain, whose transitions move both pools at once.
    pub diagonal_max: Option<f64>,
}

impl CutResiduals {
    pub fn overall_max(&self) -> f64 {
        self.vertical_max
            .max(self.horizontal_max)
            .max(self.diagonal_max.unwrap_or(0.0))
    }
}

/// For a distribution on the truncated grid, measures `|flux out - flux in|`
/// across every vertical, horizontal, and (2-sided patient only) diagonal
/// cut of the censored chain. A solved stationary distribution drives all
/// residuals to the solver tolerance; anything else does not.
pub fn balance_residuals(
    dist: &PoolDistribution,
    policy: Policy,
    params: MarketParams,
) -> CutResiduals {
    let grid = dist.grid;
    let n_vertical = grid.a_max as usize + 1;
    let n_horizontal = grid.b_max as usize + 1;
    let n_diagonal = grid.a_max as usize + grid.b_max as usize + 1;
    let mut vertical = vec![0.0f64; n_vertical];
    let mut horizontal = vec![0.0f64; n_horizontal];
    let mut diagonal = vec![0.0f64; n_diagonal];
    let use_diagonal = policy == Policy::Patient2;

    for idx in 0..dist.mass.len() {
        let mass = dist.mass[idx];
        if mass == 0.0 {
            continue;
        }
        let (k, j) = dist.grid.coords(idx);
        for entry in transition_rates(policy, params, (k, j)) {
            let (tk, tj) = entry.to;
            if tk > grid.a_max || tj > grid.b_max {
                continue; // censored
            }
            let flux = mass * entry.rate;
            // A move from value v1 to v2 of a cut statistic crosses every
            // cut c with min(v1, v2) <= c < max(v1, v2): outward when
            // rising, inward when falling.
            let account = |levels: &mut [f64], v1: i64, v2: i64| {
                let signed = if v2 > v1 { flux } else { -flux };
                for c in v1.min(v2)..v1.max(v2) {
                    levels[c as usize] += signed;
                }
            };
            account(&mut vertical, k as i64, tk as i64);
            account(&mut horizontal, j as i64, tj as i64);
            if use_diagonal {
                account(&mut diagonal, (k + j) as i64, (tk + tj) as i64);
            }
        }
    }
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    CutResiduals {
        vertical_max: max_abs(&vertical),
        horizontal_max: max_abs(&horizontal),
        diagonal_max: use_diagonal.then(|| max_abs(&diagonal)),
    }
}

/// Closed-form check available for the no-matching chain: at time `t` the
/// inactive pool sizes have mean `(1 - e^(-t)) * lambda`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InactiveMeanCheck {
    pub time: f64,
    pub observed_mean_a: f64,
    pub expected_mean_a: f64,
    pub z_a: f64,
    pub observed_mean_b: f64,
    pub expected_mean_b: f64,
    pub z_b: f64,
}

/// Simulated post-burn-in loss against the stationary functional.
#[derive(Debug, Clone, Serialize)]
pub struct SimStationaryReport {
    pub policy: Policy,
    pub simulated: LossReport,
    pub stationary: StationaryFunctionals,
    /// `|simulated - stationary|` in units of the simulation standard error.
    pub z_a: f64,
    pub z_b: f64,
    pub z_total: f64,
    /// Populated for the inactive policy only.
    pub inactive_mean_checks: Vec<InactiveMeanCheck>,
}

/// Simulates `n_reps` trajectories, discards the burn-in window, and
/// reports the distance between the time-average loss and the stationary
/// functional in standard-error units. For the inactive policy the
/// transient mean pool size is also checked against its closed form.
pub fn compare_sim_stationary(
    params: MarketParams,
    policy: Policy,
    horizon: f64,
    burn_in: f64,
    n_reps: u32,
    seed: u64,
    grid: GridSpec,
) -> Result<SimStationaryReport> {
    if n_reps == 0 {
        return Err(Error::NoReplications);
    }
    let sample_times: Vec<f64> = [0.5, 1.0, 2.0, 5.0, horizon / 2.0, horizon]
        .into_iter()
        .filter(|&t| t > 0.0 && t <= horizon)
        .collect();
    let per_rep = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let rep_seed = sim::replication_seed(seed, i);
            let (log, _) = sim::sample_trajectory(params, policy, horizon, rep_seed)?;
            let report = LossReport::from_log(&log, burn_in)?;
            let pools = log.pool_sizes_at(&sample_times)?;
            Ok((report, pools))
        })
        .collect::<Result<Vec<(LossReport, Vec<PoolSample>)>>>()?;
    let reports: Vec<LossReport> = per_rep.iter().map(|(r, _)| *r).collect();
    let simulated = LossReport::aggregate(&reports)?;
    let dist = stationary_distribution(policy, params, grid)?;
    let stationary = stationary_loss(policy, params, &dist)?;

    let z = |sim: f64, stat: f64, se: f64| {
        if se > 0.0 {
            (sim - stat).abs() / se
        } else if sim == stat {
            0.0
        } else {
            f64::INFINITY
        }
    };

    let mut inactive_mean_checks = Vec::new();
    if policy == Policy::Inactive {
        for (ti, &t) in sample_times.iter().enumerate() {
            let n = n_reps as f64;
            let samples_a: Vec<f64> = per_rep.iter().map(|(_, p)| p[ti].a as f64).collect();
            let samples_b: Vec<f64> = per_rep.iter().map(|(_, p)| p[ti].b as f64).collect();
            let stats = |xs: &[f64]| {
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                (mean, (var / n).sqrt())
            };
            let (mean_a, se_a) = stats(&samples_a);
            let (mean_b, se_b) = stats(&samples_b);
            let expected_a = (1.0 - (-t).exp()) * params.lambda_a();
            let expected_b = (1.0 - (-t).exp()) * params.lambda_b();
            inactive_mean_checks.push(InactiveMeanCheck {
                time: t,
                observed_mean_a: mean_a,
                expected_mean_a: expected_a,
                z_a: z(mean_a, expected_a, se_a),
                observed_mean_b: mean_b,
                expected_mean_b: expected_b,
                z_b: z(mean_b, expected_b, se_b),
            });
        }
    }

    Ok(SimStationaryReport {
        policy,
        z_a: z(simulated.loss_a, stationary.loss_a, simulated.se_a),
        z_b: z(simulated.loss_b, stationary.loss_b, simulated.se_b),
        z_total: z(
            simulated.loss_total,
            stationary.loss_total,
            simulated.se_total,
        ),
        simulated,
        stationary,
        inactive_mean_checks,
    })
}
