mod analyze;
mod common;
mod generate;
mod predict;
mod reproduce;
mod train;

use clap::{Parser, Subcommand};

/// Reservoir-computing surrogates of chaotic ODEs and dynamical-system
/// diagnostics on both the surrogate and the reference system.
#[derive(Parser)]
#[command(name = "resdyn", version, about)]
struct Cli {
    /// Reservoir configuration JSON (keys: N, M, alpha, dt, rho, beta,
    /// delta_tau, a_density, w_in_scale, seed).
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,

    /// Seed override for data generation and reservoir construction.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: std::path::PathBuf,

    /// Worker threads for independent batch work (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a reference system and write the trajectory CSV.
    Generate(generate::GenerateArgs),
    /// Train a reservoir model on a trajectory CSV and write the model
    /// bundle.
    Train(train::TrainArgs),
    /// Synchronize a trained model on observed data and run it freely.
    Predict(predict::PredictArgs),
    /// Dynamical-system diagnostics on a trajectory (and optionally a
    /// model).
    Analyze(analyze::AnalyzeArgs),
    /// Run a bundled experiment recipe and compare against its stored
    /// expected values.
    Reproduce(reproduce::ReproduceArgs),
}

/// Exit codes: 0 success, 1 tolerance failure, 2 usage error, 3 numerical
/// failure.
fn main() {
    let cli = Cli::parse();
    let globals = common::Globals {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        threads: if cli.threads == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            cli.threads
        },
    };
    let result = match cli.command {
        Command::Generate(args) => generate::run(&globals, args),
        Command::Train(args) => train::run(&globals, args),
        Command::Predict(args) => predict::run(&globals, args),
        Command::Analyze(args) => analyze::run(&globals, args),
        Command::Reproduce(args) => reproduce::run(&globals, args),
    };
    match result {
        Ok(code) => std::process::exit(code.0),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(common::classify_error(&e));
        }
    }
}
