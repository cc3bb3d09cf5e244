use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use resdyn_core::analysis::{self, ClvSettings, FixedPointOptions, FlowMap, ModelMap, WolfParams};
use resdyn_core::ode::{OdeSystem, StateVec3};
use resdyn_core::reservoir::ReservoirModel;
use resdyn_core::TimeSeries;
use serde_json::json;

use crate::common::{
    complex_pairs, ensure_out_dir, parse_system, write_json, ExitCode, Globals, EXIT_OK,
};

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Trajectory CSV to analyze (for model diagnostics: a free run of the
    /// model).
    #[arg(long)]
    pub data: PathBuf,

    /// Model bundle directory; map-based diagnostics (fixed points, orbit
    /// shadowing) run through the model instead of the reference flow.
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Reference system name; enables analytic Jacobians and flow-map
    /// diagnostics.
    #[arg(long)]
    pub system: Option<String>,

    /// Lyapunov spectrum and dimension.
    #[arg(long)]
    pub lyapunov: bool,

    /// Largest exponent from the scalar series by neighbor tracking.
    #[arg(long)]
    pub wolf: bool,

    /// Covariant-vector manifold angles.
    #[arg(long)]
    pub clv_angles: bool,

    /// Fixed points refined from --guesses.
    #[arg(long)]
    pub fixed_points: bool,

    /// Locate periodic orbits of --system and shadow them with --model.
    #[arg(long)]
    pub upo_shadow: bool,

    /// Section-like point set: (x, z) where |x - y| < eps-p.
    #[arg(long)]
    pub poincare: bool,

    /// Density histogram of one component.
    #[arg(long)]
    pub density: bool,

    /// Laminar lasting times of the normalized component.
    #[arg(long)]
    pub laminar: bool,

    /// Semicolon-separated fixed-point guesses "x,y,z;x,y,z;...".
    #[arg(long, default_value = "8.49,8.49,27;-8.49,-8.49,27;0,0,0")]
    pub guesses: String,

    /// Fixed-point acceptance threshold.
    #[arg(long, default_value_t = 0.01)]
    pub eps0: f64,

    /// Fixed-point validation horizon in steps.
    #[arg(long, default_value_t = 10_000)]
    pub n0: usize,

    /// Section slab half-width.
    #[arg(long, default_value_t = 0.05)]
    pub eps_p: f64,

    /// Histogram bins.
    #[arg(long, default_value_t = 100)]
    pub bins: usize,

    /// Laminar threshold on the normalized observable.
    #[arg(long, default_value_t = 1.8)]
    pub threshold: f64,

    /// Component index for scalar diagnostics.
    #[arg(long, default_value_t = 0)]
    pub component: usize,

    /// Neighbor-tracking parameters "DIM,TAU,SCALMX,SCALMN,EVOLV,ANGLMX".
    #[arg(long, default_value = "3,11,0.1,0.001,600,0.013")]
    pub wolf_params: String,

    /// QR interval (tangent steps) for spectrum and covariant vectors.
    #[arg(long, default_value_t = 5)]
    pub renorm_interval: usize,

    /// Report the angle between span(v1, v2) and v3 instead of v1 vs v3.
    #[arg(long)]
    pub clv_subspace: bool,
}

fn parse_wolf_params(text: &str) -> Result<WolfParams> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        bail!("--wolf-params needs 6 comma-separated values, got {}", parts.len());
    }
    Ok(WolfParams {
        dim: parts[0].parse().context("DIM")?,
        tau: parts[1].parse().context("TAU")?,
        scalmx: parts[2].parse().context("SCALMX")?,
        scalmn: parts[3].parse().context("SCALMN")?,
        evolv: parts[4].parse().context("EVOLV")?,
        anglmx: parts[5].parse().context("ANGLMX")?,
    })
}

fn parse_guesses(text: &str) -> Result<Vec<StateVec3>> {
    let mut out = Vec::new();
    for part in text.split(';') {
        let nums: Vec<f64> = part
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("parsing guess '{part}'"))?;
        if nums.len() != 3 {
            bail!("guess '{part}' does not have 3 components");
        }
        out.push(StateVec3::new(nums[0], nums[1], nums[2]));
    }
    Ok(out)
}

enum JacobianSource {
    Analytic(OdeSystem),
    Fitted(Box<analysis::JacobianField>),
}

impl JacobianSource {
    fn at(&self) -> impl Fn(StateVec3) -> resdyn_core::nalgebra::Matrix3<f64> + '_ {
        move |s| match self {
            JacobianSource::Analytic(sys) => sys.jacobian(s),
            JacobianSource::Fitted(field) => field.jacobian_at(s),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            JacobianSource::Analytic(_) => "analytic",
            JacobianSource::Fitted(_) => "fitted-field",
        }
    }
}

pub fn run(globals: &Globals, args: AnalyzeArgs) -> Result<ExitCode> {
    let data = TimeSeries::read_csv(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let system = args.system.as_deref().map(parse_system).transpose()?;
    let model = args
        .model
        .as_ref()
        .map(ReservoirModel::load)
        .transpose()?;
    ensure_out_dir(&globals.out)?;

    let selected = args.lyapunov
        || args.wolf
        || args.clv_angles
        || args.fixed_points
        || args.upo_shadow
        || args.poincare
        || args.density
        || args.laminar;
    if !selected {
        bail!("no analysis selected (use --lyapunov, --wolf, --clv-angles, --fixed-points, --upo-shadow, --poincare, --density or --laminar)");
    }

    // Jacobians along the trajectory: analytic for a named reference system
    // without a model, estimated from the data otherwise.
    let needs_jacobian = args.lyapunov || args.clv_angles || args.fixed_points;
    let jacobian = if needs_jacobian {
        Some(match (&system, &model) {
            (Some(sys), None) => JacobianSource::Analytic(*sys),
            _ => JacobianSource::Fitted(Box::new(analysis::fit_jacobian_field(&data)?)),
        })
    } else {
        None
    };

    if args.lyapunov {
        let jac = jacobian.as_ref().unwrap();
        let report = analysis::lyapunov_spectrum(&data, &jac.at(), args.renorm_interval)?;
        write_json(
            globals.out.join("lyapunov.json"),
            &json!({
                "exponents": report.exponents,
                "ky_dimension": report.ky_dimension,
                "trace_mean": report.trace_mean,
                "exponent_sum": report.exponents.iter().sum::<f64>(),
                "n_steps": report.n_steps,
                "renorm_interval": report.renorm_interval,
                "max_qr_error": report.max_qr_error,
                "jacobian": jac.name(),
            }),
        )?;
        println!(
            "lyapunov: ({:.4}, {:.4}, {:.4})  D_KY = {:.4}  [{}]",
            report.exponents[0], report.exponents[1], report.exponents[2],
            report.ky_dimension, jac.name()
        );
    }

    if args.wolf {
        let params = parse_wolf_params(&args.wolf_params)?;
        let series = data.component_series(args.component);
        let est = analysis::wolf_lambda1(&series, &params)?;
        write_json(
            globals.out.join("wolf.json"),
            &json!({
                "lambda1": est.lambda1,
                "segments": est.segments,
                "widened": est.widened,
                "params": {
                    "dim": params.dim, "tau": params.tau,
                    "scalmx": params.scalmx, "scalmn": params.scalmn,
                    "evolv": params.evolv, "anglmx": params.anglmx,
                },
            }),
        )?;
        println!("wolf lambda1 = {:.4} ({} segments)", est.lambda1, est.segments);
    }

    if args.clv_angles {
        let jac = jacobian.as_ref().unwrap();
        let settings = ClvSettings {
            renorm_interval: args.renorm_interval,
            ..ClvSettings::default()
        };
        let clvs = analysis::covariant_lyapunov_vectors(&data, &jac.at(), &settings)?;
        let angles = if args.clv_subspace {
            clvs.angles_span12_v3()
        } else {
            clvs.angles_v1_v3()
        };
        let hist = analysis::angle_distribution(&angles, 90);
        hist.write_csv(globals.out.join("angle_hist.csv"))?;
        let min_angle = angles.iter().copied().fold(f64::INFINITY, f64::min);
        write_json(
            globals.out.join("clv.json"),
            &json!({
                "n_points": clvs.len(),
                "min_angle_deg": min_angle,
                "mass_below_5deg": hist.mass_below(5.0),
                "covariance_max_angle_deg": clvs.covariance_max_angle_deg,
                "angle_definition": if args.clv_subspace { "span(v1,v2)-v3" } else { "v1-v3" },
            }),
        )?;
        println!(
            "clv angles: {} points, min {:.2} deg, mass below 5 deg {:.4}",
            clvs.len(),
            min_angle,
            hist.mass_below(5.0)
        );
    }

    if args.fixed_points {
        let jac = jacobian.as_ref().unwrap();
        let guesses = parse_guesses(&args.guesses)?;
        let mut rows = Vec::new();
        for guess in guesses {
            let result = match &model {
                Some(m) => analysis::find_fixed_point(
                    &ModelMap::new(m),
                    &jac.at(),
                    guess,
                    args.eps0,
                    args.n0,
                    &FixedPointOptions::default(),
                ),
                None => {
                    let sys = system
                        .ok_or_else(|| anyhow::anyhow!("--fixed-points needs --model or --system"))?;
                    analysis::find_fixed_point(
                        &FlowMap::new(sys),
                        &jac.at(),
                        guess,
                        args.eps0,
                        args.n0,
                        &FixedPointOptions::default(),
                    )
                }
            };
            match result {
                Ok(fp) => {
                    println!(
                        "fixed point ({:.4}, {:.4}, {:.4})  delta {:.2e}",
                        fp.point.x, fp.point.y, fp.point.z, fp.delta
                    );
                    rows.push(json!({
                        "guess": guess.as_array(),
                        "point": fp.point.as_array(),
                        "delta": fp.delta,
                        "eigenvalues": complex_pairs(&fp.eigenvalues),
                    }));
                }
                Err(e) => {
                    println!("fixed point from {:?}: rejected ({e})", guess.as_array());
                    rows.push(json!({
                        "guess": guess.as_array(),
                        "error": e.to_string(),
                    }));
                }
            }
        }
        write_json(
            globals.out.join("fixed_points.json"),
            &json!({"eps0": args.eps0, "n0": args.n0, "points": rows}),
        )?;
    }

    if args.upo_shadow {
        let sys = system.ok_or_else(|| anyhow::anyhow!("--upo-shadow needs --system"))?;
        let m = model
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("--upo-shadow needs --model"))?;
        let rhs = |s| sys.rhs(s);
        let jac = |s| sys.jacobian(s);
        let opts = resdyn_core::ode::upo::UpoOptions {
            sample_dt: sys.default_dt(),
            ..Default::default()
        };
        let orbits =
            resdyn_core::ode::upo::find_upos(&rhs, &jac, &data, 1.4, 5.2, 0.8, 20, 1e-10, opts);
        if orbits.is_empty() {
            bail!("no periodic orbits located in the provided trajectory");
        }
        let deltas = analysis::shadow_batch(m, &orbits, &sys, globals.threads);
        let mut rows = Vec::new();
        for (o, d) in orbits.iter().zip(deltas.iter()) {
            match d {
                Ok(d) => {
                    println!("orbit Tp {:.6}: delta_p {:.4}", o.period, d);
                    rows.push(json!({"period": o.period, "residual": o.residual, "delta_p": d}));
                }
                Err(e) => {
                    println!("orbit Tp {:.6}: shadowing failed ({e})", o.period);
                    rows.push(json!({"period": o.period, "residual": o.residual, "error": e.to_string()}));
                }
            }
        }
        write_json(globals.out.join("upo_shadow.json"), &json!({"orbits": rows}))?;
    }

    if args.poincare {
        let points = analysis::poincare_like_section(&data, args.eps_p);
        analysis::write_section_csv(&points, globals.out.join("poincare.csv"))?;
        write_json(
            globals.out.join("poincare.json"),
            &json!({"eps_p": args.eps_p, "count": points.len()}),
        )?;
        println!("section: {} points (eps_p = {})", points.len(), args.eps_p);
    }

    if args.density {
        let series = data.component_series(args.component);
        let hist = analysis::density_histogram(&series, args.bins);
        hist.write_csv(globals.out.join("density.csv"))?;
        write_json(
            globals.out.join("density.json"),
            &json!({"mean": hist.mean, "std": hist.std, "bins": args.bins, "count": hist.count}),
        )?;
        println!("density: mean {:.4}, std {:.4}", hist.mean, hist.std);
    }

    if args.laminar {
        let series = data.component_series(args.component);
        let lam = analysis::laminar_lasting_times(&series, args.threshold);
        let durations = TimeSeries::scalar(1.0, 0.0, lam.durations.clone());
        durations.write_csv(globals.out.join("laminar_durations.csv"))?;
        if let Some(hist) = &lam.histogram {
            hist.write_csv(globals.out.join("laminar_hist.csv"))?;
        }
        let mean_duration = if lam.durations.is_empty() {
            0.0
        } else {
            lam.durations.iter().sum::<f64>() / lam.durations.len() as f64
        };
        write_json(
            globals.out.join("laminar.json"),
            &json!({
                "threshold": args.threshold,
                "runs": lam.durations.len(),
                "mean_duration": mean_duration,
            }),
        )?;
        println!(
            "laminar: {} runs, mean duration {:.3}",
            lam.durations.len(),
            mean_duration
        );
    }

    Ok(EXIT_OK)
}
