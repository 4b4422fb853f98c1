//! `gridmend`: generate restoration scenarios, train incentive policies by
//! neuroevolution, evaluate policies, and compare against the exact planner
//! on small determinized instances.
//!
//! Every command is reproducible from its arguments and `--seed` alone;
//! CSV/JSON outputs are byte-stable across reruns (timing columns aside).
//! Set GRIDMEND_THREADS to override the evaluation thread count.

mod commands;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "gridmend",
    version,
    about = "Multi-crew power network restoration: simulation, learning, exact planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenario files and a manifest.
    Generate(commands::GenerateArgs),
    /// Train an incentive policy with the genetic algorithm.
    ///
    /// Writes the best genome checkpoint and a convergence CSV with columns
    /// `generation,best_fitness,mean_fitness`.
    Train(commands::TrainArgs),
    /// Evaluate a policy over episodes; writes per-episode rewards.
    ///
    /// Output CSV columns: `episode,scenario,seed,reward`. Per-step traces
    /// (columns `step,p_current_kw,reward,cumulative_reward,n_repaired`)
    /// are written per episode under --traces.
    Evaluate(commands::EvaluateArgs),
    /// Solve one small determinized instance exactly and compare policies.
    ///
    /// Output CSV columns: `method,reward,compute_seconds`.
    PlanExact(commands::PlanExactArgs),
}

fn main() -> Result<()> {
    init_thread_pool();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::PlanExact(args) => commands::plan_exact(args),
    }
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("GRIDMEND_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                // Ignore failure: the global pool may already exist in tests.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}
