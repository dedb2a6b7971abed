//! `stationing` command-line pipeline: generate a synthetic corpus, train
//! and evaluate disruption forecasts, simulate service days, optimize
//! substitute-bus stationing and replay plans against held-out days.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod errors;
mod forecast;
mod gen;
mod io;
mod manifest;
mod optimize;
mod replay;
mod simulate;

use errors::exit_code;

#[derive(Debug, Parser)]
#[command(
    name = "stationing",
    version,
    about = "Substitute-bus stationing pipeline"
)]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus from a TOML generator config.
    Gen(gen::GenArgs),
    /// Train, evaluate and compare disruption forecasts.
    #[command(subcommand)]
    Forecast(forecast::ForecastCommand),
    /// Simulate service days under a stationing plan.
    Simulate(simulate::SimulateArgs),
    /// Search for the best stationing plan.
    Optimize(optimize::OptimizeArgs),
    /// Evaluate frozen plans on ground-truth chains.
    Replay(replay::ReplayArgs),
}

/// Options shared by every command.
pub struct Globals {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub started: Instant,
}

impl Globals {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(errors::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| errors::internal(format!("thread pool: {e}")))?;
    }
    let globals = Globals {
        seed: cli.seed,
        out: cli.out,
        started: Instant::now(),
    };
    match cli.command {
        Command::Gen(args) => gen::run(&globals, args),
        Command::Forecast(cmd) => forecast::run(&globals, cmd),
        Command::Simulate(args) => simulate::run(&globals, args),
        Command::Optimize(args) => optimize::run(&globals, args),
        Command::Replay(args) => replay::run(&globals, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
