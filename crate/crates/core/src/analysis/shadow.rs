//! Shadowing of reference periodic orbits by the model's closed loop.

use crate::error::Result;
use crate::ode::upo::PeriodicOrbit;
use crate::ode::{OdeSystem, StateVec3};
use crate::reservoir::{ReservoirModel, DEFAULT_WARMUP};
use crate::series::TimeSeries;

/// Maximal deviation of the model's closed loop from a reference periodic
/// orbit of the actual system over one period: the reservoir is
/// synchronized on the orbit's own history, then runs freely for
/// n_p = ceil(T_p / dt) steps against the reference continuation.
pub fn shadow_periodic_orbit(
    model: &ReservoirModel,
    orbit: &PeriodicOrbit,
    system: &OdeSystem,
) -> Result<f64> {
    let dt = model.config.dt;
    let np = (orbit.period / dt).ceil() as usize;
    let warmup = DEFAULT_WARMUP;
    let rhs = |s| system.rhs(s);

    // Reference trajectory along the orbit: warm-up history followed by
    // one period. Periodicity keeps the whole run on the orbit; substepped
    // integration keeps the discretization drift far below the orbit
    // instability over the warm-up plus one period.
    let start = StateVec3::from(orbit.points.sample(0));
    let reference = crate::ode::integrate_fine(&rhs, start, dt, warmup + np + 1, 0, 5)?;

    let history = reference.window(0, warmup + 1);
    let synced = model.synchronize_with(&history, warmup)?;

    let mut delta = 0.0f64;
    model.run_autonomous_with(&synced, np, |k, y| {
        let reference_point = StateVec3::from(reference.sample(warmup + 1 + k));
        let model_point = StateVec3::new(y[0], y[1], y[2]);
        delta = delta.max((reference_point - model_point).norm());
    })?;
    Ok(delta)
}

/// Shadow a batch of orbits, preserving order. `threads` = 0 or 1 runs
/// sequentially; results are independent of the thread count.
pub fn shadow_batch(
    model: &ReservoirModel,
    orbits: &[PeriodicOrbit],
    system: &OdeSystem,
    threads: usize,
) -> Vec<Result<f64>> {
    crate::util::parallel_map(orbits, threads, |orbit| {
        shadow_periodic_orbit(model, orbit, system)
    })
}

/// Model self-consistency: treat a segment of the model's own free run as
/// the reference. Synchronizing on that history and rerunning must
/// reproduce the segment (echo-state property), so the deviation is tiny.
pub fn self_shadow(model: &ReservoirModel, free_run: &TimeSeries, period_steps: usize) -> Result<f64> {
    let warmup = DEFAULT_WARMUP;
    assert!(free_run.len() > warmup + period_steps + 1);
    let history = free_run.window(0, warmup + 1);
    let synced = model.synchronize_with(&history, warmup)?;
    let mut delta = 0.0f64;
    model.run_autonomous_with(&synced, period_steps, |k, y| {
        let reference = StateVec3::from(free_run.sample(warmup + 1 + k));
        let got = StateVec3::new(y[0], y[1], y[2]);
        delta = delta.max((reference - got).norm());
    })?;
    Ok(delta)
}
