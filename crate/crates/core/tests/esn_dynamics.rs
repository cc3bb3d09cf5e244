//! Echo-state behavior of driven and closed-loop reservoirs.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resdyn_core::analysis::self_shadow;
use resdyn_core::ode::{integrate, lorenz_rhs, StateVec3};
use resdyn_core::reservoir::{build_reservoir, drive, drive_with, embed_delay, ReservoirConfig, ReservoirModel};

fn lorenz_inputs(n_samples: usize, delta_tau: f64) -> resdyn_core::TimeSeries {
    let rhs = |s| lorenz_rhs(s, 28.0);
    let raw = integrate(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.01, n_samples + 20, 2_000).unwrap();
    embed_delay(&raw, delta_tau).unwrap()
}

fn small_config() -> ReservoirConfig {
    ReservoirConfig {
        n: 400,
        seed: 3,
        w_in_scale: 0.04,
        ..ReservoirConfig::lorenz28()
    }
}

#[test]
fn driven_states_forget_their_initial_condition() {
    let cfg = small_config();
    let mats = build_reservoir(&cfg).unwrap();
    let inputs = lorenz_inputs(1_000, cfg.delta_tau);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r0a = DVector::from_fn(cfg.n, |_, _| rng.gen_range(-1.0..1.0));
    let r0b = DVector::from_fn(cfg.n, |_, _| rng.gen_range(-1.0..1.0));
    let a = drive(&mats.a, &mats.w_in, cfg.alpha, &inputs, &r0a);
    let b = drive(&mats.a, &mats.w_in, cfg.alpha, &inputs, &r0b);
    let final_diff = (a.last().unwrap() - b.last().unwrap()).norm();
    assert!(
        final_diff < 1e-8,
        "states should converge after 1000 driven steps, diff {final_diff:.2e}"
    );
}

#[test]
fn synchronize_is_independent_of_the_unknown_initial_state() {
    // synchronize always starts from r = 0; independence shows as agreement
    // between two different warm-up histories that share the same tail.
    let cfg = small_config();
    let rhs = |s| lorenz_rhs(s, 28.0);
    let raw = integrate(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.01, 4_000, 2_000).unwrap();
    let cfg2 = ReservoirConfig { seed: 4, ..cfg };
    let training = integrate(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.01, 30_000, 2_000).unwrap();
    let model = ReservoirModel::train(&cfg2, &training, 500, 0.002).unwrap();
    // Longer history vs the default warm-up suffix of it.
    let s_long = model.synchronize_with(&raw, 2_500).unwrap();
    let s_short = model.synchronize_with(&raw, 1_000).unwrap();
    let diff = (s_long.state() - s_short.state()).norm();
    assert!(
        diff < 1e-8,
        "echo-state property: warm-up length beyond 1000 should not matter, diff {diff:.2e}"
    );
}

#[test]
fn synchronize_on_full_history_reproduces_the_driven_state_exactly() {
    // Same inputs, same map: driving manually from r = 0 over the whole
    // series equals synchronize() with a warm-up that covers it.
    let cfg = small_config();
    let rhs = |s| lorenz_rhs(s, 28.0);
    let raw = integrate(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.01, 3_000, 2_000).unwrap();
    let training = integrate(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.01, 30_000, 2_000).unwrap();
    let model = ReservoirModel::train(&cfg, &training, 500, 0.002).unwrap();

    let d = model.delay_steps();
    let synced = model.synchronize_with(&raw, raw.len() - d).unwrap();
    let embedded = embed_delay(&raw, cfg.delta_tau).unwrap();
    let mut manual = DVector::zeros(cfg.n);
    let mut last = DVector::zeros(cfg.n);
    drive_with(&model.a, &model.w_in, cfg.alpha, &embedded, &manual.clone(), |_, r| {
        last.copy_from(r);
    });
    manual.copy_from(&last);
    assert_eq!(
        synced.state(),
        &manual,
        "bitwise identical states from identical input history"
    );
}

#[test]
fn model_shadows_its_own_free_run() {
    let cfg = ReservoirConfig {
        n: 600,
        seed: 5,
        w_in_scale: 0.04,
        ..ReservoirConfig::lorenz28()
    };
    let rhs = |s| lorenz_rhs(s, 28.0);
    let training = integrate(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.01, 60_000, 2_000).unwrap();
    let model = ReservoirModel::train(&cfg, &training, 1000, 0.002).unwrap();
    let synced = model.synchronize(&training.tail(1200)).unwrap();
    let free = model.run_autonomous(&synced, 2_200).unwrap();
    let delta = self_shadow(&model, &free, 600).unwrap();
    assert!(
        delta < 1e-6,
        "self-shadowing deviation should be tiny, got {delta:.2e}"
    );
}

#[test]
fn divergence_guard_reports_the_step() {
    // A readout forced far beyond the training radius must trip the guard.
    let cfg = small_config();
    let rhs = |s| lorenz_rhs(s, 28.0);
    let training = integrate(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.01, 30_000, 2_000).unwrap();
    let mut model = ReservoirModel::train(&cfg, &training, 500, 0.002).unwrap();
    model.u_guard = 1e-6; // force the guard to trip immediately
    let synced = model.synchronize(&training.tail(1200)).unwrap();
    match model.run_autonomous(&synced, 100) {
        Err(resdyn_core::Error::Divergence { step, .. }) => assert_eq!(step, 0),
        other => panic!("expected Divergence, got {other:?}"),
    }
}
