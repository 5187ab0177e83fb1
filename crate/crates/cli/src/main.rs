//! `vinequant` command-line tool.

mod commands;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "vinequant", version, about = "Extreme quantiles of functions of dependent data via D-vine copulas")]
struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true, env = "VINEQUANT_THREADS")]
    threads: Option<usize>,
    /// Where to write the run manifest. By default it goes next to the main
    /// output file, or to stderr when output goes to stdout.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a D-vine to a data file.
    Fit(commands::FitArgs),
    /// Draw rows from a fitted model.
    Sample(commands::SampleArgs),
    /// Estimate an extreme quantile of a target function.
    Quantile(commands::QuantileArgs),
    /// Goodness-of-fit p-values by parametric bootstrap.
    Gof(commands::GofArgs),
    /// Run a simulation study from a config file.
    Simulate(commands::SimulateArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    }
    let manifest = cli.manifest.as_deref();
    match &cli.command {
        Command::Fit(a) => commands::fit(a, manifest),
        Command::Sample(a) => commands::sample(a, manifest),
        Command::Quantile(a) => commands::quantile(a, manifest),
        Command::Gof(a) => commands::gof(a, manifest),
        Command::Simulate(a) => commands::simulate(a, manifest),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
