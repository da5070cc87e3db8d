//! Command-line front end: simulations, stationary solves, bounds, sweeps,
//! and diagnostics for dynamic bipartite matching markets.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::CommonArgs;

#[derive(Parser)]
#[command(
    name = "matchmarket",
    version,
    about = "Dynamic bipartite matching markets: simulation, pool-size chains, loss bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Emit only the characteristic roots.
    #[arg(long = "roots-only")]
    roots_only: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Print total variation as the unhalved sum of absolute differences.
    #[arg(long = "paper-tv")]
    paper_tv: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo loss estimates; `--policy all` runs every policy plus
    /// the omniscient benchmark on coupled randomness.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve the stationary pool-size distribution and its loss
    /// functionals.
    Stationary {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Characteristic roots and every closed-form loss bound.
    Bounds(BoundsArgs),
    /// Sweep parameterizations: simulated loss, stationary loss, and
    /// bounds in one long-format table.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Concentration, flux-balance, and simulation-consistency checks.
    Diagnose(DiagnoseArgs),
}

fn main() -> ExitCode {
    matchmarket::runtime::configure_threads_from_env();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => run(common, commands::cmd_simulate),
        Command::Stationary { common } => run(common, commands::cmd_stationary),
        Command::Bounds(args) => run(&args.common, |cfg, out| {
            commands::cmd_bounds(cfg, args.roots_only, out)
        }),
        Command::Compare { common } => run(common, commands::cmd_compare),
        Command::Diagnose(args) => run(&args.common, |cfg, out| {
            commands::cmd_diagnose(cfg, args.paper_tv, out)
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(
    common: &CommonArgs,
    body: impl FnOnce(&config::RunConfig, Option<PathBuf>) -> Result<(), Box<dyn std::error::Error>>,
) -> Result<(), Box<dyn std::error::Error>> {
    let config = common.resolve()?;
    body(&config, common.out.clone())
}
