//! Experiment runner for the dagsched framework.
//!
//! Subcommands cover the full pipeline: synthetic profile emission, oracle
//! dataset generation, policy training, DAgger refinement, simulation,
//! report comparison, leave-one-out studies, parameter sweeps, and
//! scheduling-latency benchmarks. Every command is deterministic given its
//! seeds (latency benches excepted).

mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dagsched", version, about = "DAG streaming scheduler experiments")]
struct Cli {
    /// Output directory; relative output paths land here.
    /// Defaults to $DAGSCHED_OUT or the current directory.
    #[arg(long, global = true)]
    out_dir: Option<std::path::PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a platform description with generated profile tables.
    GenProfiles(commands::GenProfilesArgs),
    /// Run the oracle over an injection-rate sweep and write the dataset.
    GenDataset(commands::GenDatasetArgs),
    /// Train hierarchical and flat policies; report held-out accuracy.
    Train(commands::TrainArgs),
    /// Refine a policy with hierarchical DAgger iterations.
    Dagger(commands::DaggerArgs),
    /// Simulate one workload under a scheduler and write reports.
    Simulate(commands::SimulateArgs),
    /// Join two reports into slowdown figures.
    Compare(commands::CompareArgs),
    /// Leave-one-out generalization study.
    Loo(commands::LooArgs),
    /// Run a (platform × rate × noise × scheduler) sweep concurrently.
    Sweep(commands::SweepArgs),
    /// Measure per-decision wall-clock of a policy against ETF.
    BenchLatency(commands::BenchLatencyArgs),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let out_dir = cli
        .out_dir
        .or_else(|| std::env::var_os("DAGSCHED_OUT").map(Into::into))
        .unwrap_or_else(|| ".".into());
    match cli.command {
        Command::GenProfiles(args) => commands::gen_profiles(&out_dir, args),
        Command::GenDataset(args) => commands::gen_dataset(&out_dir, args),
        Command::Train(args) => commands::train(&out_dir, args),
        Command::Dagger(args) => commands::dagger(&out_dir, args),
        Command::Simulate(args) => commands::simulate(&out_dir, args),
        Command::Compare(args) => commands::compare(&out_dir, args),
        Command::Loo(args) => commands::loo(&out_dir, args),
        Command::Sweep(args) => commands::sweep(&out_dir, args),
        Command::BenchLatency(args) => commands::bench_latency(&out_dir, args),
    }
}
