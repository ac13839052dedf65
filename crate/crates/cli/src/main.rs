//! Command-line front end: train models, estimate boundary distances, and
//! audit the estimates for robustness bias, with reproducible manifests.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "rbaudit",
    version,
    about = "Audit classifiers for robustness bias: exact, attack, and certified boundary distances with partition-level bias scores"
)]
struct Cli {
    /// Worker threads for per-example estimation (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate synthetic datasets (and their reference boundary models).
    Synth(commands::synth::SynthArgs),
    /// Train an affine or MLP classifier, optionally with the bias penalty.
    Train(commands::train::TrainArgs),
    /// Estimate per-example distances to the decision boundary.
    Estimate(commands::estimate::EstimateArgs),
    /// Compute robustness curves, bias scores, and estimator agreement.
    Audit(commands::audit::AuditArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        // A second global-pool initialization (e.g. in-process reuse) only
        // means the first width wins; not an error worth dying over.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let result = match cli.command {
        Commands::Synth(args) => commands::synth::run(args),
        Commands::Train(args) => commands::train::run(args),
        Commands::Estimate(args) => commands::estimate::run(args),
        Commands::Audit(args) => commands::audit::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
