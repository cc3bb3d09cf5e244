use anyhow::{bail, Context, Result};
use clap::Args;
use resdyn_core::analysis::{self, ClvSettings, FixedPointOptions, FlowMap, ModelMap};
use resdyn_core::ode::upo::{find_upo, find_upos, UpoOptions};
use resdyn_core::ode::{integrate, integrate_with, OdeSystem, StateVec3};
use resdyn_core::reservoir::ReservoirModel;
use resdyn_core::TimeSeries;
use serde::Deserialize;
use serde_json::json;

use crate::common::{
    complex_pairs, default_config, ensure_out_dir, write_json, ExitCode, Globals, EXIT_OK,
    EXIT_TOLERANCE,
};

#[derive(Args)]
pub struct ReproduceArgs {
    /// Recipe identifier: table2, table3, table4, table5, fig1, fig2,
    /// fig4, fig5, fig6 or fig8.
    pub identifier: String,

    /// Override the training length (time units).
    #[arg(long)]
    pub t_train: Option<f64>,

    /// Override the reservoir dimension.
    #[arg(long)]
    pub n_reservoir: Option<usize>,
}

const VALID: &[&str] = &[
    "table2", "table3", "table4", "table5", "fig1", "fig2", "fig4", "fig5", "fig6", "fig8",
];

#[derive(Deserialize)]
struct Fixture {
    description: String,
    checks: Vec<FixtureCheck>,
}

#[derive(Deserialize)]
struct FixtureCheck {
    name: String,
    /// "abs": |got - expect| <= tol; "rel": |got - expect| <= tol |expect|;
    /// "max": got <= expect; "min": got >= expect.
    kind: String,
    expect: f64,
    #[serde(default)]
    tol: f64,
}

fn fixture(identifier: &str) -> Result<Fixture> {
    let text = match identifier {
        "table2" => include_str!("../fixtures/table2.json"),
        "table3" => include_str!("../fixtures/table3.json"),
        "table4" => include_str!("../fixtures/table4.json"),
        "table5" => include_str!("../fixtures/table5.json"),
        "fig1" => include_str!("../fixtures/fig1.json"),
        "fig2" => include_str!("../fixtures/fig2.json"),
        "fig4" => include_str!("../fixtures/fig4.json"),
        "fig5" => include_str!("../fixtures/fig5.json"),
        "fig6" => include_str!("../fixtures/fig6.json"),
        "fig8" => include_str!("../fixtures/fig8.json"),
        other => bail!(
            "unknown identifier '{other}'; valid identifiers: {}",
            VALID.join(", ")
        ),
    };
    Ok(serde_json::from_str(text)?)
}

/// Values computed by a recipe, compared against the fixture.
struct Report {
    values: Vec<(String, f64)>,
}

impl Report {
    fn new() -> Self {
        Self { values: Vec::new() }
    }

    fn set(&mut self, name: &str, value: f64) {
        self.values.push((name.to_string(), value));
    }

    fn get(&self, name: &str) -> Option<f64> {
        self.values
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

fn evaluate(fixture: &Fixture, report: &Report) -> (Vec<serde_json::Value>, bool) {
    let mut rows = Vec::new();
    let mut all_pass = true;
    for check in &fixture.checks {
        let (pass, got) = match report.get(&check.name) {
            Some(got) => {
                let ok = match check.kind.as_str() {
                    "abs" => (got - check.expect).abs() <= check.tol,
                    "rel" => (got - check.expect).abs() <= check.tol * check.expect.abs(),
                    "max" => got <= check.expect,
                    "min" => got >= check.expect,
                    _ => false,
                };
                (ok, Some(got))
            }
            None => (false, None),
        };
        all_pass &= pass;
        let line = match got {
            Some(got) => format!(
                "{} {}: {:.6} ({} {} tol {})",
                if pass { "PASS" } else { "FAIL" },
                check.name,
                got,
                check.kind,
                check.expect,
                check.tol
            ),
            None => format!("FAIL {}: value not produced", check.name),
        };
        println!("{line}");
        rows.push(json!({
            "name": check.name,
            "pass": pass,
            "got": got,
            "kind": check.kind,
            "expect": check.expect,
            "tol": check.tol,
        }));
    }
    (rows, all_pass)
}

/// Shared context for the Lorenz-model recipes.
struct LorenzSetup {
    system: OdeSystem,
    training: TimeSeries,
    model: ReservoirModel,
}

fn lorenz_setup(globals: &Globals, args: &ReproduceArgs, r: f64) -> Result<LorenzSetup> {
    let system = OdeSystem::Lorenz { r };
    let mut cfg = default_config(&system);
    if let Some(n) = args.n_reservoir {
        cfg.n = n;
    } else if (r - 60.0).abs() < 1e-9 {
        cfg.n = 1500;
    }
    if let Some(seed) = globals.seed {
        cfg.seed = seed;
    } else {
        cfg.seed = 7;
    }
    let t_train = args.t_train.unwrap_or(if (r - 60.0).abs() < 1e-9 { 3000.0 } else { 5000.0 });
    let n_train = (t_train / cfg.dt).round() as usize;
    eprintln!("[setup] integrating training data (T = {t_train}) ...");
    let rhs = |s| system.rhs(s);
    let training = integrate(&rhs, system.default_initial(), cfg.dt, n_train, 5_000)?;
    eprintln!("[setup] training reservoir (N = {}) ...", cfg.n);
    let model = ReservoirModel::train(&cfg, &training, 1000, 0.002)?;
    Ok(LorenzSetup {
        system,
        training,
        model,
    })
}

fn free_run(setup: &LorenzSetup, steps: usize) -> Result<TimeSeries> {
    eprintln!("[setup] closed-loop free run ({steps} steps) ...");
    let synced = setup.model.synchronize(&setup.training.tail(1200))?;
    Ok(setup.model.run_autonomous(&synced, steps)?)
}

struct RosslerSetup {
    training: TimeSeries,
    model: ReservoirModel,
    free: TimeSeries,
    field: analysis::JacobianField,
}

fn rossler_setup(globals: &Globals, args: &ReproduceArgs) -> Result<RosslerSetup> {
    let system = OdeSystem::Rossler;
    let mut cfg = default_config(&system);
    cfg.w_in_scale = 0.08;
    cfg.delta_tau = 0.5;
    if let Some(n) = args.n_reservoir {
        cfg.n = n;
    } else {
        cfg.n = 1000;
    }
    cfg.seed = globals.seed.unwrap_or(7);
    let t_train = args.t_train.unwrap_or(2500.0);
    let n_train = (t_train / cfg.dt).round() as usize;
    let rhs = |s| system.rhs(s);
    eprintln!("[setup] integrating Roessler training data (T = {t_train}) ...");
    let training = integrate(&rhs, system.default_initial(), cfg.dt, n_train, 2_000)?;
    eprintln!("[setup] training reservoir (N = {}) ...", cfg.n);
    let model = ReservoirModel::train(&cfg, &training, 1000, 0.001)?;
    let synced = model.synchronize(&training.tail(1200))?;
    let free = model.run_autonomous(&synced, 200_000)?;
    let field = analysis::fit_jacobian_field(&free)?;
    Ok(RosslerSetup {
        training,
        model,
        free,
        field,
    })
}

pub fn run(globals: &Globals, args: ReproduceArgs) -> Result<ExitCode> {
    let fixture = fixture(&args.identifier)?;
    ensure_out_dir(&globals.out)?;
    println!("recipe {}: {}", args.identifier, fixture.description);

    let mut report = Report::new();
    match args.identifier.as_str() {
        "table2" => table2(globals, &args, &mut report)?,
        "table3" => table3(globals, &args, &mut report)?,
        "table4" => table4(globals, &args, &mut report)?,
        "table5" => table5(globals, &args, &mut report)?,
        "fig1" => fig1(globals, &args, &mut report)?,
        "fig2" => fig2(globals, &args, &mut report)?,
        "fig4" => fig4(globals, &args, &mut report)?,
        "fig5" => fig5(globals, &args, &mut report)?,
        "fig6" => fig6(globals, &args, &mut report)?,
        "fig8" => fig8(globals, &args, &mut report)?,
        _ => unreachable!("validated by fixture()"),
    }

    let (rows, all_pass) = evaluate(&fixture, &report);
    write_json(
        globals.out.join(format!("{}_summary.json", args.identifier)),
        &json!({
            "recipe": args.identifier,
            "description": fixture.description,
            "all_pass": all_pass,
            "checks": rows,
            "values": report.values.iter().map(|(n, v)| json!({"name": n, "value": v})).collect::<Vec<_>>(),
        }),
    )?;
    println!(
        "{}: {}",
        args.identifier,
        if all_pass { "ALL CHECKS PASSED" } else { "CHECK FAILURES" }
    );
    Ok(if all_pass { EXIT_OK } else { EXIT_TOLERANCE })
}

fn table2(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    let setup = lorenz_setup(globals, args, 28.0)?;
    let free = free_run(&setup, 1_000_000)?;
    let field = analysis::fit_jacobian_field(&free)?;
    let map = ModelMap::new(&setup.model);
    let jac = |s| field.jacobian_at(s);
    let mut rows = Vec::new();

    for (label, guess, eps0, n0) in [
        ("r_res", StateVec3::new(8.49, 8.49, 27.0), 0.01, 10_000usize),
        ("l_res", StateVec3::new(-8.49, -8.49, 27.0), 0.01, 10_000),
        ("o_res", StateVec3::new(0.0, 0.0, 0.0), 1.0, 30),
    ] {
        let fp = analysis::find_fixed_point(&map, &jac, guess, eps0, n0, &FixedPointOptions::default())
            .with_context(|| format!("fixed point {label}"))?;
        report.set(&format!("{label}_x"), fp.point.x);
        report.set(&format!("{label}_y"), fp.point.y);
        report.set(&format!("{label}_z"), fp.point.z);
        report.set(&format!("{label}_lambda1_re"), fp.eigenvalues[0].re);
        report.set(&format!("{label}_lambda1_abs"), fp.eigenvalues[0].norm());
        report.set(&format!("{label}_lambda3"), fp.eigenvalues[2].re);
        rows.push(json!({
            "label": label,
            "point": fp.point.as_array(),
            "delta": fp.delta,
            "eigenvalues": complex_pairs(&fp.eigenvalues),
        }));
    }
    report.set(
        "o_res_distance_to_origin",
        StateVec3::new(
            report.get("o_res_x").unwrap(),
            report.get("o_res_y").unwrap(),
            report.get("o_res_z").unwrap(),
        )
        .norm(),
    );

    // Actual-system fixed points through the same machinery, analytic
    // Jacobians for the eigenvalues.
    let flow_map = FlowMap::new(setup.system);
    let analytic = |s| setup.system.jacobian(s);
    for (label, guess, eps0, n0) in [
        ("r_actual", StateVec3::new(8.0, 9.0, 26.0), 0.01, 10_000usize),
        ("l_actual", StateVec3::new(-8.0, -9.0, 26.0), 0.01, 10_000),
        ("o_actual", StateVec3::new(0.2, -0.1, 0.3), 1.0, 30),
    ] {
        let fp = analysis::find_fixed_point(
            &flow_map,
            &analytic,
            guess,
            eps0,
            n0,
            &FixedPointOptions::default(),
        )
        .with_context(|| format!("fixed point {label}"))?;
        report.set(&format!("{label}_x"), fp.point.x);
        report.set(&format!("{label}_z"), fp.point.z);
        report.set(&format!("{label}_lambda1_abs"), fp.eigenvalues[0].norm());
        report.set(&format!("{label}_lambda3"), fp.eigenvalues[2].re);
        rows.push(json!({
            "label": label,
            "point": fp.point.as_array(),
            "delta": fp.delta,
            "eigenvalues": complex_pairs(&fp.eigenvalues),
        }));
    }
    write_json(globals.out.join("table2.json"), &json!({ "fixed_points": rows }))?;
    Ok(())
}

fn table3(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    let mut rows = Vec::new();
    for (tag, r, orbit_dt) in [("28", 28.0, 0.01), ("60", 60.0, 0.005)] {
        let system = OdeSystem::Lorenz { r };
        let rhs = |s| system.rhs(s);
        let jac = |s| system.jacobian(s);
        eprintln!("[table3] actual r={r} spectrum ...");
        let n = (100_000.0 / orbit_dt) as usize + 1;
        let orbit = integrate(&rhs, system.default_initial(), orbit_dt, n, 5_000)?;
        let rep = analysis::lyapunov_spectrum(&orbit, &jac, 5)?;
        report.set(&format!("actual{tag}_lambda1"), rep.exponents[0]);
        report.set(&format!("actual{tag}_lambda2"), rep.exponents[1]);
        report.set(&format!("actual{tag}_lambda3"), rep.exponents[2]);
        report.set(&format!("actual{tag}_dky"), rep.ky_dimension);
        rows.push(json!({"system": format!("lorenz r={r} actual"), "exponents": rep.exponents, "ky_dimension": rep.ky_dimension}));

        let setup = lorenz_setup(globals, args, r)?;
        let free = free_run(&setup, 1_500_000)?;
        let field = analysis::fit_jacobian_field(&free)?;
        let rep = analysis::lyapunov_spectrum(&free, &|s| field.jacobian_at(s), 5)?;
        report.set(&format!("model{tag}_lambda1"), rep.exponents[0]);
        report.set(&format!("model{tag}_lambda2"), rep.exponents[1]);
        report.set(&format!("model{tag}_lambda3"), rep.exponents[2]);
        report.set(&format!("model{tag}_dky"), rep.ky_dimension);
        rows.push(json!({"system": format!("lorenz r={r} model"), "exponents": rep.exponents, "ky_dimension": rep.ky_dimension}));
    }
    write_json(globals.out.join("table3.json"), &json!({ "rows": rows }))?;
    Ok(())
}

fn table4(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    let setup = rossler_setup(globals, args)?;
    // Analytic fixed point of the reference system.
    let flow_map = FlowMap::new(OdeSystem::Rossler);
    let fp_actual = analysis::find_fixed_point(
        &flow_map,
        &|s| OdeSystem::Rossler.jacobian(s),
        StateVec3::new(0.01, -0.04, 0.04),
        0.01,
        800,
        &FixedPointOptions::default(),
    )?;
    report.set("factual_x", fp_actual.point.x);
    report.set("factual_y", fp_actual.point.y);
    report.set("factual_z", fp_actual.point.z);
    report.set("factual_lambda1_re", fp_actual.eigenvalues[0].re);
    report.set("factual_lambda1_im", fp_actual.eigenvalues[0].im.abs());
    report.set("factual_lambda3", fp_actual.eigenvalues[2].re);

    let map = ModelMap::new(&setup.model);
    let fp = analysis::find_fixed_point(
        &map,
        &|s| setup.field.jacobian_at(s),
        StateVec3::new(0.007, -0.035, 0.035),
        0.01,
        800,
        &FixedPointOptions::default(),
    )?;
    report.set("fres_x", fp.point.x);
    report.set("fres_y", fp.point.y);
    report.set("fres_z", fp.point.z);
    report.set("fres_distance_to_factual", (fp.point - fp_actual.point).norm());
    report.set("fres_lambda1_re", fp.eigenvalues[0].re);
    report.set("fres_lambda1_im", fp.eigenvalues[0].im.abs());
    report.set("fres_lambda3", fp.eigenvalues[2].re);
    write_json(
        globals.out.join("table4.json"),
        &json!({
            "f_actual": {"point": fp_actual.point.as_array(), "eigenvalues": complex_pairs(&fp_actual.eigenvalues)},
            "f_res": {"point": fp.point.as_array(), "delta": fp.delta, "eigenvalues": complex_pairs(&fp.eigenvalues)},
        }),
    )?;
    Ok(())
}

fn table5(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    let system = OdeSystem::Rossler;
    let rhs = |s| system.rhs(s);
    eprintln!("[table5] actual spectrum ...");
    let orbit = integrate(&rhs, system.default_initial(), 0.025, 12_000_001, 4_000)?;
    let rep = analysis::lyapunov_spectrum(&orbit, &|s| system.jacobian(s), 5)?;
    report.set("actual_lambda1", rep.exponents[0]);
    report.set("actual_lambda2", rep.exponents[1]);
    report.set("actual_lambda3", rep.exponents[2]);
    report.set("actual_dky", rep.ky_dimension);
    drop(orbit);

    let setup = rossler_setup(globals, args)?;
    let synced = setup.model.synchronize(&setup.training.tail(1200))?;
    let free = setup.model.run_autonomous(&synced, 400_000)?;
    let field = analysis::fit_jacobian_field(&free)?;
    let rep_model = analysis::lyapunov_spectrum(&free, &|s| field.jacobian_at(s), 5)?;
    report.set("model_lambda1", rep_model.exponents[0]);
    report.set("model_lambda2", rep_model.exponents[1]);
    report.set("model_lambda3", rep_model.exponents[2]);
    report.set("model_dky", rep_model.ky_dimension);
    write_json(
        globals.out.join("table5.json"),
        &json!({
            "actual": {"exponents": rep.exponents, "ky_dimension": rep.ky_dimension},
            "model": {"exponents": rep_model.exponents, "ky_dimension": rep_model.ky_dimension},
        }),
    )?;
    Ok(())
}

fn fig1(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    let setup = lorenz_setup(globals, args, 28.0)?;
    let free = free_run(&setup, 2_000_000)?;
    let eps = 0.05;
    let sec_model = analysis::poincare_like_section(&free, eps);
    let sec_train = analysis::poincare_like_section(&setup.training, eps);
    // Equal-length actual section for the count comparison.
    let rhs = |s| setup.system.rhs(s);
    let mut sec_actual_eq: Vec<(f64, f64)> = Vec::new();
    integrate_with(&rhs, StateVec3::new(-5.0, 3.0, 30.0), 0.01, free.len(), 5_000, |_, s| {
        if (s.x - s.y).abs() < eps {
            sec_actual_eq.push((s.x, s.z));
        }
    })?;
    analysis::write_section_csv(&sec_model, globals.out.join("fig1_model.csv"))?;
    analysis::write_section_csv(&sec_actual_eq, globals.out.join("fig1_actual.csv"))?;
    analysis::write_section_csv(&sec_train, globals.out.join("fig1_training.csv"))?;

    report.set(
        "count_ratio",
        sec_actual_eq.len() as f64 / sec_model.len().max(1) as f64,
    );
    let model_cov = analysis::coverage_fraction(&sec_actual_eq, &sec_model, 0.5);
    let train_cov = analysis::coverage_fraction(&sec_actual_eq, &sec_train, 0.5);
    report.set("model_coverage", model_cov);
    report.set("training_coverage", train_cov);
    report.set(
        "training_uncovered_factor",
        (1.0 - train_cov) / (1.0 - model_cov).max(1e-9),
    );
    Ok(())
}

fn fig2(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    let setup = lorenz_setup(globals, args, 28.0)?;
    let free = free_run(&setup, 2_000_000)?;
    // Long actual reference, streamed: only the x component is kept.
    eprintln!("[fig2] long actual reference run ...");
    let rhs = |s| setup.system.rhs(s);
    let n_actual = 40_000_000usize;
    let mut xs = Vec::with_capacity(n_actual);
    integrate_with(&rhs, StateVec3::new(-5.0, 3.0, 30.0), 0.01, n_actual, 5_000, |_, s| {
        xs.push(s.x);
    })?;
    let actual_x = TimeSeries::scalar(0.01, 0.0, xs);

    let bins = 100;
    let (mut lo, mut hi) = actual_x.min_max(0);
    for series in [&free, &setup.training] {
        let (l, h) = series.min_max(0);
        lo = lo.min(l);
        hi = hi.max(h);
    }
    let edges = analysis::uniform_edges(lo, hi, bins);
    let h_actual = analysis::Histogram::from_values(actual_x.component(0), edges.clone());
    let h_model = analysis::Histogram::from_values(free.component(0), edges.clone());
    let h_train = analysis::Histogram::from_values(setup.training.component(0), edges);
    h_actual.write_csv(globals.out.join("fig2_actual.csv"))?;
    h_model.write_csv(globals.out.join("fig2_model.csv"))?;
    h_train.write_csv(globals.out.join("fig2_training.csv"))?;

    report.set("actual_mean", h_actual.mean);
    report.set("actual_std", h_actual.std);
    report.set("model_mean", h_model.mean);
    report.set("model_std", h_model.std);
    let l1_model = analysis::density_l1(&h_model, &h_actual)?;
    let l1_train = analysis::density_l1(&h_train, &h_actual)?;
    report.set("l1_model", l1_model);
    report.set("l1_training", l1_train);
    report.set("l1_ratio", l1_model / l1_train);
    Ok(())
}

/// Reference orbit start for the long shadowing example (period close to
/// six time units).
const LORENZ_ORBIT_SEED: StateVec3 = StateVec3 {
    x: 2.8840371627122219e-1,
    y: 3.1189587075096969e-1,
    z: 1.4423209379791421e1,
};

fn fig4(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    let setup = lorenz_setup(globals, args, 28.0)?;
    let system = setup.system;
    let rhs = |s| system.rhs(s);
    let jac = |s| system.jacobian(s);
    eprintln!("[fig4] locating periodic orbits ...");
    let scan = integrate(&rhs, StateVec3::new(2.0, 1.0, 5.0), 0.01, 400_000, 3_000)?;
    let mut orbits = find_upos(&rhs, &jac, &scan, 1.4, 5.2, 0.8, 20, 1e-10, UpoOptions::default());
    // The long reference orbit shown in the trajectory comparison.
    let seed = integrate(&rhs, LORENZ_ORBIT_SEED, 0.01, 605, 0)?;
    let fig_orbit = find_upo(&rhs, &jac, &seed, 6.0, 1e-9, UpoOptions::default())?;
    report.set("fig_orbit_period", fig_orbit.period);
    fig_orbit.points.write_csv(globals.out.join("fig4_orbit.csv"))?;
    orbits.push(fig_orbit);

    let deltas = analysis::shadow_batch(&setup.model, &orbits, &system, globals.threads);
    let mut rows = Vec::new();
    let mut n_ok = 0usize;
    let mut below_04 = 0usize;
    let mut below_01 = 0usize;
    for (o, d) in orbits.iter().zip(deltas.iter()) {
        match d {
            Ok(d) => {
                n_ok += 1;
                if *d < 0.4 {
                    below_04 += 1;
                }
                if *d < 0.1 {
                    below_01 += 1;
                }
                rows.push(json!({"period": o.period, "residual": o.residual, "delta_p": d}));
            }
            Err(e) => rows.push(json!({"period": o.period, "error": e.to_string()})),
        }
    }
    let fig_delta = rows
        .last()
        .and_then(|r| r.get("delta_p"))
        .and_then(|v| v.as_f64())
        .unwrap_or(f64::INFINITY);
    report.set("fig_orbit_delta", fig_delta);
    report.set("n_orbits", n_ok as f64);
    report.set("frac_below_04", below_04 as f64 / n_ok.max(1) as f64);
    report.set("frac_below_01", below_01 as f64 / n_ok.max(1) as f64);
    write_json(globals.out.join("fig4.json"), &json!({ "orbits": rows }))?;
    Ok(())
}

fn clv_mass_below_5(
    orbit: &TimeSeries,
    jac: &dyn Fn(StateVec3) -> resdyn_core::nalgebra::Matrix3<f64>,
) -> Result<(analysis::Histogram, f64)> {
    let clvs = analysis::covariant_lyapunov_vectors(orbit, &jac, &ClvSettings::default())?;
    let hist = analysis::angle_distribution(&clvs.angles_v1_v3(), 90);
    let mass = hist.mass_below(5.0);
    Ok((hist, mass))
}

fn fig5(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    for (tag, r) in [("r28", 28.0), ("r60", 60.0)] {
        let system = OdeSystem::Lorenz { r };
        let rhs = |s| system.rhs(s);
        eprintln!("[fig5] actual r={r} covariant vectors ...");
        let orbit = integrate(&rhs, system.default_initial(), 0.01, 1_000_001, 5_000)?;
        let jac = move |s| system.jacobian(s);
        let (h_actual, mass_actual) = clv_mass_below_5(&orbit, &jac)?;
        h_actual.write_csv(globals.out.join(format!("fig5_{tag}_actual.csv")))?;
        report.set(&format!("{tag}_actual_mass_below5"), mass_actual);

        let setup = lorenz_setup(globals, args, r)?;
        let free = free_run(&setup, 1_000_000)?;
        let field = analysis::fit_jacobian_field(&free)?;
        let jac_model = move |s| field.jacobian_at(s);
        let (h_model, mass_model) = clv_mass_below_5(&free, &jac_model)?;
        h_model.write_csv(globals.out.join(format!("fig5_{tag}_model.csv")))?;
        report.set(&format!("{tag}_model_mass_below5"), mass_model);
        report.set(
            &format!("{tag}_l1"),
            analysis::density_l1(&h_model, &h_actual)?,
        );
    }
    Ok(())
}

/// Reference orbit start for the Roessler shadowing example (period close
/// to thirty-five time units).
const ROSSLER_ORBIT_SEED: StateVec3 = StateVec3 {
    x: -1.9836870616291895e0,
    y: 4.2537011576204113e0,
    z: 2.8713993545999076e-2,
};

fn fig6(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    let setup = rossler_setup(globals, args)?;
    // Fixed point (as in the table4 recipe) plus the long periodic orbit.
    let map = ModelMap::new(&setup.model);
    let fp = analysis::find_fixed_point(
        &map,
        &|s| setup.field.jacobian_at(s),
        StateVec3::new(0.007, -0.035, 0.035),
        0.01,
        800,
        &FixedPointOptions::default(),
    )?;
    let d = (5.7f64 * 5.7 - 0.16).sqrt();
    let f_actual = StateVec3::new((5.7 - d) / 2.0, -(5.7 - d) / 0.4, (5.7 - d) / 0.4);
    report.set("fres_distance_to_factual", (fp.point - f_actual).norm());

    let rhs = |s| OdeSystem::Rossler.rhs(s);
    let jac = |s| OdeSystem::Rossler.jacobian(s);
    let seed = integrate(&rhs, ROSSLER_ORBIT_SEED, 0.05, 703, 0)?;
    let opts = UpoOptions {
        segment_time: 0.5,
        sample_dt: 0.05,
        ..UpoOptions::default()
    };
    let orbit = find_upo(&rhs, &jac, &seed, 35.0, 1e-7, opts)?;
    report.set("orbit_period", orbit.period);
    orbit.points.write_csv(globals.out.join("fig6_orbit.csv"))?;
    let delta = analysis::shadow_periodic_orbit(&setup.model, &orbit, &OdeSystem::Rossler)?;
    report.set("shadow_delta", delta);
    setup.free.write_csv(globals.out.join("fig6_model_run.csv"))?;
    write_json(
        globals.out.join("fig6.json"),
        &json!({
            "f_res": {"point": fp.point.as_array(), "eigenvalues": complex_pairs(&fp.eigenvalues)},
            "orbit_period": orbit.period,
            "shadow_delta": delta,
        }),
    )?;
    Ok(())
}

fn fig8(globals: &Globals, args: &ReproduceArgs, report: &mut Report) -> Result<()> {
    let system = OdeSystem::Rossler;
    let rhs = |s| system.rhs(s);
    eprintln!("[fig8] actual covariant vectors ...");
    let orbit = integrate(&rhs, system.default_initial(), 0.05, 400_001, 2_000)?;
    let jac = |s| system.jacobian(s);
    let (h_actual, _) = clv_mass_below_5(&orbit, &jac)?;
    h_actual.write_csv(globals.out.join("fig8_actual.csv"))?;

    let setup = rossler_setup(globals, args)?;
    let synced = setup.model.synchronize(&setup.training.tail(1200))?;
    let free = setup.model.run_autonomous(&synced, 400_000)?;
    let field = analysis::fit_jacobian_field(&free)?;
    let jac_model = move |s| field.jacobian_at(s);
    let (h_model, _) = clv_mass_below_5(&free, &jac_model)?;
    h_model.write_csv(globals.out.join("fig8_model.csv"))?;
    report.set("l1", analysis::density_l1(&h_model, &h_actual)?);
    report.set("actual_integral", h_actual.integral());
    report.set("model_integral", h_model.integral());
    Ok(())
}
