//! `forte`: replay, simulate, train and benchmark the tactile pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd;
mod config;
mod fail;

use fail::Failure;

#[derive(Parser, Debug)]
#[command(name = "forte", version, about = "Slip detection, force estimation and grasp control on 2 kHz air-channel traces")]
struct Cli {
    /// Default seed for every random choice.
    #[arg(long, global = true, env = "FORTE_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a recorded trace through the slip detector and optional force model.
    Replay(cmd::replay::Args),
    /// Closed-loop grasp episodes over objects, policies and seeds.
    Grasp(cmd::grasp::Args),
    /// Generate traces and ground truth from a scenario.
    Simulate(cmd::simulate::Args),
    /// Fit a force regressor and save it as JSON.
    TrainForce(cmd::force::TrainArgs),
    /// Trial-wise cross-validation of the force regressor.
    EvalForce(cmd::force::EvalArgs),
    /// Grid search over the slip thresholds.
    Sweep(cmd::sweep::Args),
    /// Throughput and latency on a synthetic load.
    Bench(cmd::bench::Args),
}

/// Options every command accepts.
#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// `key = value` file overriding the defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Replay(a) => cmd::replay::run(a),
        Command::Grasp(a) => cmd::grasp::run(a, seed),
        Command::Simulate(a) => cmd::simulate::run(a, seed),
        Command::TrainForce(a) => cmd::force::train(a, seed),
        Command::EvalForce(a) => cmd::force::eval(a, seed),
        Command::Sweep(a) => cmd::sweep::run(a, seed),
        Command::Bench(a) => cmd::bench::run(a, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("forte: {f}");
            ExitCode::from(f.code())
        }
    }
}
