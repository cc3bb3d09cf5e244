use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use resdyn_core::reservoir::ReservoirModel;
use resdyn_core::TimeSeries;

use crate::common::{ensure_out_dir, ExitCode, Globals, EXIT_OK};

#[derive(Args)]
pub struct PredictArgs {
    /// Model bundle directory.
    #[arg(long)]
    pub model: PathBuf,

    /// Observed trajectory CSV used to synchronize the reservoir (the tail
    /// is the warm-up).
    #[arg(long)]
    pub warmup: PathBuf,

    /// Closed-loop steps to run.
    #[arg(long)]
    pub steps: usize,

    /// Output file name inside the output directory.
    #[arg(long, default_value = "prediction.csv")]
    pub name: String,
}

pub fn run(globals: &Globals, args: PredictArgs) -> Result<ExitCode> {
    let model = ReservoirModel::load(&args.model)?;
    let observed = TimeSeries::read_csv(&args.warmup)
        .with_context(|| format!("reading {}", args.warmup.display()))?;
    let synced = model.synchronize(&observed)?;
    let prediction = model.run_autonomous(&synced, args.steps)?;
    ensure_out_dir(&globals.out)?;
    let path = globals.out.join(&args.name);
    prediction.write_csv(&path)?;
    println!(
        "ran {} closed-loop steps (T = {}) -> {}",
        args.steps,
        args.steps as f64 * model.config.dt,
        path.display()
    );
    Ok(EXIT_OK)
}
