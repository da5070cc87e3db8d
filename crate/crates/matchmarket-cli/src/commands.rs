//! Subcommand implementations.

use std::error::Error;
use std::path::PathBuf;

use rayon::prelude::*;

use matchmarket::bounds::{self, lower_bound_for};
use matchmarket::ctmc::{
    default_grid, empirical_distribution, stationary_distribution, stationary_loss, tv_distance,
    tv_sampling_floor, StationaryFunctionals,
};
use matchmarket::diagnostics::{balance_residuals, compare_sim_stationary, concentration_report};
use matchmarket::sim::{self, LossReport};
use matchmarket::{MarketParams, Policy};

use crate::config::{OutputFormat, PolicySelection, RunConfig, SweepPoint};
use crate::output::{fmt_f64, Sink};

type CmdResult = Result<(), Box<dyn Error>>;

const SIMULATE_HEADER: &str =
    "policy,lambda_a,lambda_b,p,d_a,d_b,T,reps,seed,loss_a,loss_b,loss_total,se_a,se_b,se_total";

fn simulate_row(name: &str, params: MarketParams, config: &RunConfig, r: &LossReport) -> String {
    let d = params.densities();
    [
        name.to_string(),
        fmt_f64(params.lambda_a()),
        fmt_f64(params.lambda_b()),
        fmt_f64(params.p()),
        fmt_f64(d.d_a),
        fmt_f64(d.d_b),
        fmt_f64(config.horizon),
        config.replications.to_string(),
        config.seed.to_string(),
        fmt_f64(r.loss_a),
        fmt_f64(r.loss_b),
        fmt_f64(r.loss_total),
        fmt_f64(r.se_a),
        fmt_f64(r.se_b),
        fmt_f64(r.se_total),
    ]
    .join(",")
}

fn simulate_json(
    name: &str,
    params: MarketParams,
    config: &RunConfig,
    r: &LossReport,
) -> serde_json::Value {
    let d = params.densities();
    serde_json::json!({
        "policy": name,
        "lambda_a": params.lambda_a(),
        "lambda_b": params.lambda_b(),
        "p": params.p(),
        "d_a": d.d_a,
        "d_b": d.d_b,
        "T": config.horizon,
        "reps": config.replications,
        "seed": config.seed,
        "loss_a": r.loss_a,
        "loss_b": r.loss_b,
        "loss_total": r.loss_total,
        "se_a": r.se_a,
        "se_b": r.se_b,
        "se_total": r.se_total,
    })
}

/// The four matching policies plus the omniscient benchmark, every
/// replication on coupled randomness.
pub fn coupled_replication_reports(
    params: MarketParams,
    horizon: f64,
    burn_in: f64,
    n_reps: u32,
    seed: u64,
    policies: &[Policy],
    with_omniscient: bool,
) -> Result<(Vec<LossReport>, Option<LossReport>), matchmarket::Error> {
    let per_rep: Vec<(Vec<LossReport>, Option<LossReport>)> = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let rep_seed = sim::replication_seed(seed, i);
            let runs = sim::coupled_run(params, horizon, rep_seed, policies)?;
            let reports = runs
                .iter()
                .map(|(log, _)| LossReport::from_log(log, burn_in))
                .collect::<Result<Vec<_>, _>>()?;
            let omn = if with_omniscient {
                let (log, _) = sim::omniscient_loss(params, horizon, rep_seed)?;
                Some(LossReport::from_log(&log, burn_in)?)
            } else {
                None
            };
            Ok((reports, omn))
        })
        .collect::<Result<Vec<_>, matchmarket::Error>>()?;

    let mut by_policy = Vec::with_capacity(policies.len());
    for (pi, _) in policies.iter().enumerate() {
        let reports: Vec<LossReport> = per_rep.iter().map(|(r, _)| r[pi]).collect();
        by_policy.push(LossReport::aggregate(&reports)?);
    }
    let omniscient = if with_omniscient {
        let reports: Vec<LossReport> = per_rep.iter().map(|(_, o)| o.unwrap()).collect();
        Some(LossReport::aggregate(&reports)?)
    } else {
        None
    };
    Ok((by_policy, omniscient))
}

pub fn cmd_simulate(config: &RunConfig, out: Option<PathBuf>) -> CmdResult {
    let params = config.params()?;
    let sink = Sink::new(out.as_deref());
    let results: Vec<(String, LossReport)> = match config.policy_selection()? {
        PolicySelection::One(policy) => {
            let report = sim::run_replications_windowed(
                params,
                policy,
                config.horizon,
                config.burn_in,
                config.replications,
                config.seed,
            )?;
            vec![(policy.name().to_string(), report)]
        }
        PolicySelection::All => {
            let policies = Policy::MATCHING;
            let (by_policy, omniscient) = coupled_replication_reports(
                params,
                config.horizon,
                config.burn_in,
                config.replications,
                config.seed,
                &policies,
                true,
            )?;
            let mut rows: Vec<(String, LossReport)> = policies
                .iter()
                .zip(by_policy)
                .map(|(p, r)| (p.name().to_string(), r))
                .collect();
            rows.push(("omniscient".to_string(), omniscient.unwrap()));
            rows
        }
    };
    match config.format {
        OutputFormat::Csv => {
            let rows: Vec<String> = results
                .iter()
                .map(|(name, r)| simulate_row(name, params, config, r))
                .collect();
            sink.write_csv(&config.echo_json(), SIMULATE_HEADER, &rows)?;
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = results
                .iter()
                .map(|(name, r)| simulate_json(name, params, config, r))
                .collect();
            sink.write_json(&serde_json::json!({
                "config": serde_json::from_str::<serde_json::Value>(&config.echo_json())?,
                "results": rows,
            }))?;
        }
    }
    Ok(())
}

pub fn cmd_stationary(config: &RunConfig, out: Option<PathBuf>) -> CmdResult {
    let params = config.params()?;
    let PolicySelection::One(policy) = config.policy_selection()? else {
        return Err("stationary requires a single --policy, not `all`".into());
    };
    let dist = stationary_distribution(policy, params, config.grid_spec())?;
    let functionals = stationary_loss(policy, params, &dist)?;
    let json = serde_json::json!({
        "config": serde_json::from_str::<serde_json::Value>(&config.echo_json())?,
        "policy": policy.name(),
        "functionals": functionals,
        "leak": dist.leak,
    });
    match &out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            dist.write_csv(&mut file)?;
            let json_path = path.with_extension("functionals.json");
            std::fs::write(&json_path, serde_json::to_string_pretty(&json)?)?;
            eprintln!(
                "wrote distribution to {} and functionals to {}",
                path.display(),
                json_path.display()
            );
        }
        None => {
            let stdout = std::io::stdout();
            dist.write_csv(stdout.lock())?;
            println!("{}", serde_json::to_string_pretty(&json)?);
        }
    }
    Ok(())
}

pub fn cmd_bounds(config: &RunConfig, roots_only: bool, out: Option<PathBuf>) -> CmdResult {
    let params = config.params()?;
    let sink = Sink::new(out.as_deref());
    let sigma_a = config
        .sigma_a
        .unwrap_or_else(|| bounds::default_sigma(params.lambda_a()));
    let sigma_b = config
        .sigma_b
        .unwrap_or_else(|| bounds::default_sigma(params.lambda_b()));
    if roots_only {
        let roots = bounds::solve_rootset_with(params, sigma_a, sigma_b);
        sink.write_json(&serde_json::to_value(roots)?)?;
    } else {
        let set = bounds::bound_set_with(params, sigma_a, sigma_b);
        sink.write_json(&serde_json::to_value(set)?)?;
    }
    Ok(())
}

const COMPARE_HEADER: &str = "lambda_a,lambda_b,p,d_a,d_b,policy,T,reps,seed,burn_in,\
sim_loss_a,sim_loss_b,sim_loss_total,sim_se_a,sim_se_b,sim_se_total,\
stat_loss_a,stat_loss_b,stat_loss_total,upper_a,upper_b,upper_total,lower_total";

struct CompareRow {
    point: SweepPoint,
    policy: Policy,
    sim: LossReport,
    stat: StationaryFunctionals,
    upper: (f64, f64, f64),
    lower_total: f64,
}

pub fn cmd_compare(config: &RunConfig, out: Option<PathBuf>) -> CmdResult {
    let policies = config.policy_list()?;
    if policies.is_empty() {
        return Err("compare needs a nonempty `policies` list".into());
    }
    let mut points = config.sweep.clone();
    if points.is_empty() {
        // A single-point sweep over the base parameterization.
        points.push(SweepPoint {
            lambda_a: config.lambda_a,
            lambda_b: config.lambda_b,
            p: config.p,
        });
    }
    // Fan out over sweep points; rows come back in deterministic sweep
    // order regardless of completion order.
    let rows: Vec<Vec<CompareRow>> = points
        .par_iter()
        .map(
            |&point| -> Result<Vec<CompareRow>, Box<dyn Error + Send + Sync>> {
                let params = MarketParams::new(point.lambda_a, point.lambda_b, point.p)?;
                let grid = default_grid(params);
                let upper = bounds::upper_bounds(params);
                let lower = bounds::lower_bounds(params);
                let (by_policy, _) = coupled_replication_reports(
                    params,
                    config.horizon,
                    config.burn_in,
                    config.replications,
                    config.seed,
                    &policies,
                    false,
                )?;
                policies
                    .iter()
                    .zip(by_policy)
                    .map(|(&policy, sim)| {
                        let dist = stationary_distribution(policy, params, grid)?;
                        let stat = stationary_loss(policy, params, &dist)?;
                        let upper = match policy {
                            Policy::Greedy2 => (
                                upper.greedy2.loss_a,
                                upper.greedy2.loss_b,
                                upper.greedy2.total,
                            ),
                            Policy::Patient2 => (
                                upper.patient2.loss_a,
                                upper.patient2.loss_b,
                                upper.patient2.total,
                            ),
                            Policy::Greedy1 | Policy::Patient1 => {
                                (upper.alg1.loss_a, upper.alg1.loss_b, upper.alg1.total)
                            }
                            Policy::Inactive => (1.0, 1.0, 1.0),
                        };
                        Ok(CompareRow {
                            point,
                            policy,
                            sim,
                            stat,
                            upper,
                            lower_total: lower_bound_for(policy, &lower),
                        })
                    })
                    .collect()
            },
        )
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| -> Box<dyn Error> { e.to_string().into() })?;

    let sink = Sink::new(out.as_deref());
    let flat: Vec<&CompareRow> = rows.iter().flatten().collect();
    match config.format {
        OutputFormat::Csv => {
            let lines: Vec<String> = flat
                .iter()
                .map(|r| {
                    let d_a = r.point.lambda_a * r.point.p;
                    let d_b = r.point.lambda_b * r.point.p;
                    [
                        fmt_f64(r.point.lambda_a),
                        fmt_f64(r.point.lambda_b),
                        fmt_f64(r.point.p),
                        fmt_f64(d_a),
                        fmt_f64(d_b),
                        r.policy.name().to_string(),
                        fmt_f64(config.horizon),
                        config.replications.to_string(),
                        config.seed.to_string(),
                        fmt_f64(config.burn_in),
                        fmt_f64(r.sim.loss_a),
                        fmt_f64(r.sim.loss_b),
                        fmt_f64(r.sim.loss_total),
                        fmt_f64(r.sim.se_a),
                        fmt_f64(r.sim.se_b),
                        fmt_f64(r.sim.se_total),
                        fmt_f64(r.stat.loss_a),
                        fmt_f64(r.stat.loss_b),
                        fmt_f64(r.stat.loss_total),
                        fmt_f64(r.upper.0),
                        fmt_f64(r.upper.1),
                        fmt_f64(r.upper.2),
                        fmt_f64(r.lower_total),
                    ]
                    .join(",")
                })
                .collect();
            sink.write_csv(&config.echo_json(), COMPARE_HEADER, &lines)?;
        }
        OutputFormat::Json => {
            let objects: Vec<serde_json::Value> = flat
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "lambda_a": r.point.lambda_a,
                        "lambda_b": r.point.lambda_b,
                        "p": r.point.p,
                        "policy": r.policy.name(),
                        "sim_loss_total": r.sim.loss_total,
                        "sim_se_total": r.sim.se_total,
                        "sim_loss_a": r.sim.loss_a,
                        "sim_loss_b": r.sim.loss_b,
                        "stat_loss_total": r.stat.loss_total,
                        "stat_loss_a": r.stat.loss_a,
                        "stat_loss_b": r.stat.loss_b,
                        "upper_total": r.upper.2,
                        "lower_total": r.lower_total,
                    })
                })
                .collect();
            sink.write_json(&serde_json::json!({
                "config": serde_json::from_str::<serde_json::Value>(&config.echo_json())?,
                "results": objects,
            }))?;
        }
    }
    Ok(())
}

pub fn cmd_diagnose(config: &RunConfig, paper_tv: bool, out: Option<PathBuf>) -> CmdResult {
    let params = config.params()?;
    let grid = config.grid_spec();
    let policies: Vec<Policy> = match config.policy_selection()? {
        PolicySelection::One(p) => vec![p],
        PolicySelection::All => Policy::MATCHING.to_vec(),
    };
    let balance_tol = 1e-8 * params.lambda_total();
    let mut reports = Vec::new();
    for policy in policies {
        let dist = stationary_distribution(policy, params, grid)?;
        let residuals = balance_residuals(&dist, policy, params);
        let balance_pass = residuals.overall_max() < balance_tol;
        println!(
            "policy {policy}: leak={:.3e} balance_residual={:.3e} (tol {:.3e}) [{}]",
            dist.leak,
            residuals.overall_max(),
            balance_tol,
            if balance_pass { "PASS" } else { "FAIL" }
        );
        let concentration = concentration_report(
            params,
            policy,
            grid,
            config.sigma_a,
            config.sigma_b,
            config.tail_threshold,
        )?;
        for entry in &concentration.entries {
            match &entry.skipped {
                Some(reason) => println!("  SKIP {:<26} {reason}", entry.id),
                None => println!(
                    "  {} {:<26} mass {:.5} (threshold {}) {}",
                    if entry.pass { "PASS" } else { "FAIL" },
                    entry.id,
                    entry.tail_mass,
                    entry.threshold,
                    entry.region,
                ),
            }
        }
        let mut sim_json = serde_json::Value::Null;
        if config.replications >= 2 {
            let sim = compare_sim_stationary(
                params,
                policy,
                config.horizon,
                config.burn_in,
                config.replications,
                config.seed,
                grid,
            )?;
            println!(
                "  sim vs stationary: z_a {:.2} z_b {:.2} z_total {:.2} [{}]",
                sim.z_a,
                sim.z_b,
                sim.z_total,
                if sim.z_total < 3.0 && sim.z_a < 3.0 && sim.z_b < 3.0 {
                    "PASS"
                } else {
                    "FAIL"
                }
            );
            let empirical = empirical_distribution(
                params,
                policy,
                config.horizon,
                config.replications,
                config.seed,
                grid,
            )?;
            let tv = tv_distance(&empirical, &dist)?;
            let floor = tv_sampling_floor(&dist, config.replications);
            let (shown_tv, shown_floor, convention) = if paper_tv {
                (2.0 * tv, 2.0 * floor, "unhalved sum |p-q|")
            } else {
                (tv, floor, "0.5 sum |p-q|")
            };
            println!(
                "  empirical tv at t={}: {:.4} (sampling floor {:.4}, convention: {convention})",
                config.horizon, shown_tv, shown_floor
            );
            sim_json = serde_json::json!({
                "z_a": sim.z_a,
                "z_b": sim.z_b,
                "z_total": sim.z_total,
                "tv": tv,
                "tv_sampling_floor": floor,
            });
        }
        reports.push(serde_json::json!({
            "policy": policy.name(),
            "leak": dist.leak,
            "balance_residual": residuals.overall_max(),
            "balance_tolerance": balance_tol,
            "balance_pass": balance_pass,
            "concentration": concentration,
            "simulation": sim_json,
        }));
    }
    if let Some(path) = out {
        let doc = serde_json::json!({
            "config": serde_json::from_str::<serde_json::Value>(&config.echo_json())?,
            "reports": reports,
        });
        std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
        eprintln!("wrote diagnostics to {}", path.display());
    }
    Ok(())
}
