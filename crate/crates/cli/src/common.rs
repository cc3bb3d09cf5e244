use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use resdyn_core::ode::OdeSystem;
use resdyn_core::reservoir::ReservoirConfig;

pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub threads: usize,
}

/// Process exit code for a successful command run (tolerance checks may
/// still have failed, which maps to 1).
pub struct ExitCode(pub i32);

pub const EXIT_OK: ExitCode = ExitCode(0);
pub const EXIT_TOLERANCE: ExitCode = ExitCode(1);
const USAGE: i32 = 2;
const NUMERICAL: i32 = 3;

/// Usage problems exit with 2, numerical failures with 3.
pub fn classify_error(e: &anyhow::Error) -> i32 {
    if let Some(core) = e.downcast_ref::<resdyn_core::Error>() {
        return match core {
            resdyn_core::Error::BlowUp { .. }
            | resdyn_core::Error::Divergence { .. }
            | resdyn_core::Error::NoConvergence { .. }
            | resdyn_core::Error::NotAFixedPoint { .. }
            | resdyn_core::Error::RankDeficient(_)
            | resdyn_core::Error::IllConditioned { .. } => NUMERICAL,
            _ => USAGE,
        };
    }
    USAGE
}

pub fn parse_system(name: &str) -> Result<OdeSystem> {
    match name {
        "lorenz28" => Ok(OdeSystem::lorenz28()),
        "lorenz60" => Ok(OdeSystem::lorenz60()),
        "rossler" => Ok(OdeSystem::Rossler),
        other => bail!("unknown system '{other}' (expected lorenz28, lorenz60 or rossler)"),
    }
}

/// Calibrated default reservoir configuration for a reference system.
pub fn default_config(system: &OdeSystem) -> ReservoirConfig {
    let mut cfg = match system {
        OdeSystem::Lorenz { r } if (*r - 60.0).abs() < 1e-9 => ReservoirConfig::lorenz60(),
        OdeSystem::Lorenz { .. } => ReservoirConfig::lorenz28(),
        OdeSystem::Rossler => ReservoirConfig::rossler(),
    };
    cfg.w_in_scale = 0.04;
    cfg
}

/// Default relative training-noise amplitude per system.
pub fn default_noise(system: &OdeSystem) -> f64 {
    match system {
        OdeSystem::Lorenz { .. } => 0.002,
        OdeSystem::Rossler => 0.001,
    }
}

pub fn load_config(globals: &Globals, system: Option<&OdeSystem>) -> Result<ReservoirConfig> {
    let mut cfg = match &globals.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<ReservoirConfig>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => match system {
            Some(sys) => default_config(sys),
            None => bail!("no --config given and no system to derive defaults from"),
        },
    };
    if let Some(seed) = globals.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

pub fn write_json<P: AsRef<Path>, T: serde::Serialize>(path: P, value: &T) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())
        .with_context(|| format!("creating {}", path.as_ref().display()))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

/// Eigenvalues serialized as [re, im] pairs.
pub fn complex_pairs(eigs: &[resdyn_core::nalgebra::Complex<f64>]) -> Vec<[f64; 2]> {
    eigs.iter().map(|c| [c.re, c.im]).collect()
}
