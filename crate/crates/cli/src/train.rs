use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use resdyn_core::reservoir::ReservoirModel;
use resdyn_core::TimeSeries;

use crate::common::{
    default_noise, ensure_out_dir, load_config, parse_system, ExitCode, Globals, EXIT_OK,
};

#[derive(Args)]
pub struct TrainArgs {
    /// Training trajectory CSV.
    #[arg(long)]
    pub data: PathBuf,

    /// System name used for default hyperparameters when --config is not
    /// given.
    #[arg(long)]
    pub system: Option<String>,

    /// Transient reservoir states discarded before the regression.
    #[arg(long, default_value_t = 1000)]
    pub l0: usize,

    /// Relative training-noise amplitude (per-component fraction of the
    /// standard deviation). Default: per-system calibrated value.
    #[arg(long)]
    pub noise: Option<f64>,

    /// Model bundle directory name inside the output directory.
    #[arg(long, default_value = "model")]
    pub name: String,
}

pub fn run(globals: &Globals, args: TrainArgs) -> Result<ExitCode> {
    let system = args.system.as_deref().map(parse_system).transpose()?;
    let config = load_config(globals, system.as_ref())?;
    let noise = args
        .noise
        .or_else(|| system.as_ref().map(default_noise))
        .unwrap_or(0.0);
    let training = TimeSeries::read_csv(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;

    let model = ReservoirModel::train(&config, &training, args.l0, noise)?;
    let sr = model.spectral_radius();
    ensure_out_dir(&globals.out)?;
    let dir = globals.out.join(&args.name);
    model.save(&dir)?;
    if model.seed_used != config.seed {
        eprintln!(
            "note: seed {} produced a degenerate draw; rebuilt with seed {}",
            config.seed, model.seed_used
        );
    }
    println!(
        "trained N={} M={} on {} samples (noise {noise}); spectral radius {:.8} (target {}), \
         ridge residual {:.2e}; bundle at {}",
        config.n,
        config.m,
        training.len(),
        sr,
        config.rho,
        model.ridge_residual,
        dir.display()
    );
    Ok(EXIT_OK)
}
