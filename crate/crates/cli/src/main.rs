//! `simulate <config> [--out DIR] [--seed N] [--oracle]`
//!
//! Exit status: 0 on success, 1 for configuration or output errors, 2 when the
//! run aborts on non-finite values (partial outputs and a `FAILED` marker are kept).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lowrank_vlasov::config::parse_config;
use lowrank_vlasov::driver::{run, DriverError, Solver};

#[derive(Debug, Parser)]
#[command(name = "simulate", about = "Low-rank Vlasov-Maxwell simulation")]
struct Args {
    /// Run configuration (`key = value` lines).
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the rank-padding vectors; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the full-tensor reference solver (small grids only).
    #[arg(long)]
    oracle: bool,
}

const CONFIG_ERROR: u8 = 1;
const NUMERICAL_ABORT: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            log::error!("cannot read {}: {e}", args.config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{}: {e}", args.config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    if let Some(seed) = args.seed {
        config.scenario.seed = seed;
    }
    let solver = if args.oracle { Solver::FullTensor } else { Solver::LowRank };

    match run(&config, solver) {
        Ok(report) => match report.trajectory.abort {
            None => {
                log::info!("wrote {}", report.output_dir.display());
                ExitCode::SUCCESS
            }
            Some(abort) => {
                log::error!("aborted at step {} (t = {}): {}", abort.step, abort.time, abort.reason);
                ExitCode::from(NUMERICAL_ABORT)
            }
        },
        Err(DriverError::Scenario(e)) => {
            log::error!("{e}");
            ExitCode::from(CONFIG_ERROR)
        }
        Err(e @ DriverError::Io(_)) => {
            log::error!("{e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}
