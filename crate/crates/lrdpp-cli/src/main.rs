//! Command-line surface for the low-rank basket model: train, predict,
//! evaluate, check, bench.
//!
//! Exit codes: 0 on success, 1 when an operation or property check fails,
//! 2 on usage errors (clap's default).

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "lrdpp",
    version,
    about = "Low-rank determinantal point process models for basket completion"
)]
struct Cli {
    /// Worker threads for gradient evaluation; 1 keeps training fully
    /// sequential and bit-reproducible across machines.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a trait matrix from a basket file.
    Train(commands::train::TrainArgs),
    /// Complete a partial basket with the most likely next items.
    Predict(commands::predict::PredictArgs),
    /// Held-one-out ranking metrics for a trained model.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Randomized agreement checks against the brute-force oracles.
    Check(commands::check::CheckArgs),
    /// Prediction-time comparison: low-rank versus dense conditioning.
    Bench(commands::bench::BenchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    // Ignore the error from double initialization, which only happens in
    // tests that call main twice in one process.
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .ok();

    let outcome = match cli.command {
        Command::Train(args) => commands::train::run(args, cli.threads),
        Command::Predict(args) => commands::predict::run(args, cli.threads),
        Command::Evaluate(args) => commands::evaluate::run(args, cli.threads),
        Command::Check(args) => commands::check::run(args, cli.threads),
        Command::Bench(args) => commands::bench::run(args, cli.threads),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
