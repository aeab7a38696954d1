//! `qproc`: generate populations, estimate quantile-based parameters, run
//! Monte Carlo campaigns and evaluate asymptotic comparison conditions.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage, config and
//! input errors.

mod compare;
mod config;
mod error;
mod estimate;
mod generate;
mod output;
mod simulate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Parser)]
#[command(name = "qproc", version, about = "Finite-population quantile estimation under complex survey designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a truncated-normal population CSV (flat or stratified).
    Generate(ConfigArgs),
    /// Draw one sample and print estimates with confidence intervals.
    Estimate(ConfigArgs),
    /// Run a Monte Carlo campaign; writes report.csv and summary.json.
    Simulate(ConfigArgs),
    /// Evaluate asymptotic comparison conditions over a grid.
    Compare(ConfigArgs),
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML config file.
    config: Option<PathBuf>,
    /// Set or override a config key; the value is a TOML literal.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved config, defaults included, and exit.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => with_config(&a, |c: &generate::GenerateConfig, base| generate::run(c, base), |_| None),
        Command::Estimate(a) => with_config(&a, estimate::run, |c: &estimate::EstimateConfig| c.threads),
        Command::Simulate(a) => with_config(&a, simulate::run, |c: &simulate::SimulateConfig| c.threads),
        Command::Compare(a) => with_config(&a, compare::run, compare::CompareConfig::threads),
    }
}

fn with_config<T: DeserializeOwned + Serialize>(
    args: &ConfigArgs,
    run: impl FnOnce(&T, &Path) -> Result<()>,
    threads: impl FnOnce(&T) -> Option<usize>,
) -> Result<()> {
    let (cfg, base) = config::load::<T>(args.config.as_deref(), &args.set)?;
    if args.print_config {
        let text = toml::to_string(&cfg).map_err(|e| CliError::Output(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    config::init_threads(threads(&cfg))?;
    run(&cfg, &base)
}
