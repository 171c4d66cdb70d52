mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use randhill::ErrorClass;

/// Numerical laboratory for Hill's equation with random cycle parameters.
#[derive(Debug, Parser)]
#[command(name = "randhill", version)]
pub struct Cli {
    /// Worker threads for parallel stages; results do not depend on it.
    #[arg(long, global = true, env = "RANDHILL_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Principal solutions and stability verdict for a single cycle.
    Cycle(commands::CycleArgs),
    /// Impulse-limit stability chart on a (lambda, q) grid.
    Chart(commands::ChartArgs),
    /// Growth-rate estimators for a sample, a distribution, or orbit cycles.
    Growth(commands::GrowthArgs),
    /// Seeded Monte Carlo experiments.
    Mc(commands::McArgs),
    /// Integrate a planar orbit and extract its forcing cycles.
    Orbit(commands::OrbitArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Verify {
        /// Run one suite only (see the README for names).
        #[arg(long)]
        suite: Option<String>,
        /// Also write the outcomes as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit status for each failure class.
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_DOMAIN: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_ACCEPTANCE: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<randhill::Error>().map(|e| e.class()) {
        Some(ErrorClass::Domain) => EXIT_DOMAIN,
        Some(ErrorClass::Numeric) => EXIT_NUMERIC,
        None => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    match commands::dispatch(cli.command, threads) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
