//! Unstable periodic orbits by recurrence seeding and multiple shooting.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::ode::{flow, flow_with_tangent, StateVec3};
use crate::series::TimeSeries;

/// A closed orbit sampled at the series step, with its period and the
/// closure error of one full-period integration from `points[0]`.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub points: TimeSeries,
    pub period: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct UpoOptions {
    /// Target length of one shooting segment (time units).
    pub segment_time: f64,
    /// RK4 substep for segment integration.
    pub substep: f64,
    pub max_iterations: usize,
    /// Sampling step of the returned orbit points.
    pub sample_dt: f64,
}

impl Default for UpoOptions {
    fn default() -> Self {
        Self {
            segment_time: 0.3,
            substep: 1e-3,
            max_iterations: 120,
            sample_dt: 0.01,
        }
    }
}

/// Linear interpolation of a 3-component series at fractional sample index.
fn lerp_sample(series: &TimeSeries, idx: f64) -> StateVec3 {
    let last = series.len() - 1;
    let lo = (idx.floor() as usize).min(last);
    let hi = (lo + 1).min(last);
    let w = (idx - lo as f64).clamp(0.0, 1.0);
    let a = StateVec3::from(series.sample(lo));
    let b = StateVec3::from(series.sample(hi));
    a + (b - a) * w
}

/// Multiple-shooting Newton refinement of a near-recurrent seed segment into
/// a periodic orbit. The period is an unknown; the phase is pinned by the
/// plane through the seed's first point normal to the flow there.
pub fn find_upo<F, J>(
    rhs: &F,
    jac: &J,
    seed_segment: &TimeSeries,
    tp_guess: f64,
    tol: f64,
    opts: UpoOptions,
) -> Result<PeriodicOrbit>
where
    F: Fn(StateVec3) -> StateVec3,
    J: Fn(StateVec3) -> Matrix3<f64>,
{
    assert!(tol > 0.0 && tp_guess > 0.0);
    assert_eq!(seed_segment.dim(), 3);
    if seed_segment.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: seed_segment.len(),
        });
    }

    let m = ((tp_guess / opts.segment_time).ceil() as usize).max(2);
    let dt_seed = seed_segment.dt();
    let mut points: Vec<StateVec3> = (0..m)
        .map(|j| lerp_sample(seed_segment, j as f64 * tp_guess / (m as f64 * dt_seed)))
        .collect();
    let mut period = tp_guess;

    let anchor = points[0];
    let normal = {
        let f = rhs(anchor);
        let n = f.norm();
        if n == 0.0 {
            return Err(Error::InvalidConfig(
                "seed starts at an equilibrium; cannot fix the orbit phase".into(),
            ));
        }
        f * (1.0 / n)
    };

    let dim = 3 * m + 1;
    let scale = 1.0 + points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let newton_tol = 1e-12 * scale;

    let eval_residual = |pts: &[StateVec3], tp: f64| -> Option<DVector<f64>> {
        let tau = tp / m as f64;
        let mut f = DVector::zeros(dim);
        for j in 0..m {
            let end = flow(rhs, pts[j], tau, opts.substep);
            if !end.is_finite() {
                return None;
            }
            let target = pts[(j + 1) % m];
            let d = end - target;
            f[3 * j] = d.x;
            f[3 * j + 1] = d.y;
            f[3 * j + 2] = d.z;
        }
        f[3 * m] = normal.dot(pts[0] - anchor);
        Some(f)
    };

    // Pre-fit the period alone before the joint Newton. For orbits that are
    // not isolated (a linear center) the joint linearization is solved
    // exactly by collapsing onto the equilibrium, so the period must already
    // be right when the Newton loop starts.
    {
        let score = |tp: f64| -> f64 {
            eval_residual(&points, tp)
                .map(|f| f.norm())
                .unwrap_or(f64::INFINITY)
        };
        let mut lo = 0.98 * period;
        let mut hi = 1.02 * period;
        for _ in 0..90 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if score(m1) <= score(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let mid = 0.5 * (lo + hi);
        if score(mid) < score(period) {
            period = mid;
        }
    }

    let mut f_val = eval_residual(&points, period)
        .ok_or(Error::NoConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        })?;
    let mut f_norm = f_val.amax();

    let mut iterations = 0;
    while f_norm > newton_tol {
        // Stagnation near machine precision is fine; the closure check on
        // the resampled orbit below is the actual acceptance gate.
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let tau = period / m as f64;
        let mut jmat = DMatrix::zeros(dim, dim);
        for j in 0..m {
            let (end, tangent) = flow_with_tangent(rhs, jac, points[j], tau, opts.substep);
            for r in 0..3 {
                for c in 0..3 {
                    jmat[(3 * j + r, 3 * j + c)] = tangent[(r, c)];
                }
            }
            let nxt = (j + 1) % m;
            for r in 0..3 {
                jmat[(3 * j + r, 3 * nxt + r)] += -1.0;
            }
            let dtp = rhs(end) * (1.0 / m as f64);
            jmat[(3 * j, 3 * m)] = dtp.x;
            jmat[(3 * j + 1, 3 * m)] = dtp.y;
            jmat[(3 * j + 2, 3 * m)] = dtp.z;
        }
        jmat[(3 * m, 0)] = normal.x;
        jmat[(3 * m, 1)] = normal.y;
        jmat[(3 * m, 2)] = normal.z;

        // Damped (Levenberg-Marquardt) SVD solve. Directions with singular
        // value below the residual scale are suppressed; for degenerate
        // orbit families (a linear center) the undamped exact solution is a
        // collapse onto the equilibrium, which the damping rejects while
        // the well-conditioned directions still give Newton steps.
        let svd = jmat.svd(true, true);
        let u = svd.u.as_ref().ok_or_else(|| {
            Error::RankDeficient("SVD left vectors unavailable".into())
        })?;
        let v_t = svd.v_t.as_ref().ok_or_else(|| {
            Error::RankDeficient("SVD right vectors unavailable".into())
        })?;
        // Damping only needs to exceed the near-zero singular value of a
        // degenerate family direction; a scale-capped value keeps genuine
        // Newton steps intact even for rough seeds.
        let mu = (0.1 * f_val.norm()).min(0.05).max(1e-12);
        let mut coef = u.transpose() * (-&f_val);
        for (i, c) in coef.iter_mut().enumerate() {
            let s = svd.singular_values[i];
            *c *= s / (s * s + mu * mu);
        }
        let step = v_t.transpose() * coef;

        // Backtracking damping on the residual norm.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial_points: Vec<StateVec3> = points
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    *p + StateVec3::new(step[3 * j], step[3 * j + 1], step[3 * j + 2]) * lambda
                })
                .collect();
            let trial_period = period + lambda * step[3 * m];
            if trial_period > 0.0 {
                if let Some(trial_f) = eval_residual(&trial_points, trial_period) {
                    let trial_norm = trial_f.amax();
                    if trial_norm < f_norm {
                        points = trial_points;
                        period = trial_period;
                        f_val = trial_f;
                        f_norm = trial_norm;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    // Reject collapse onto an equilibrium.
    let seed_diameter = {
        let (xl, xh) = seed_segment.min_max(0);
        let (yl, yh) = seed_segment.min_max(1);
        let (zl, zh) = seed_segment.min_max(2);
        ((xh - xl).powi(2) + (yh - yl).powi(2) + (zh - zl).powi(2)).sqrt()
    };
    let diameter = points
        .iter()
        .map(|p| (*p - points[0]).norm())
        .fold(0.0, f64::max);
    if diameter < 1e-3 * seed_diameter {
        return Err(Error::NoConvergence {
            iterations,
            residual: f_norm,
        });
    }

    // Resample at the requested dt and measure the true closure error.
    let n_pts = (period / opts.sample_dt).round().max(1.0) as usize;
    let mut sampled = Vec::with_capacity(n_pts);
    let mut s = points[0];
    for _ in 0..n_pts {
        sampled.push(s);
        s = flow(rhs, s, opts.sample_dt, opts.substep);
    }
    let closed = flow(rhs, points[0], period, opts.substep);
    let residual = (closed - points[0]).norm();
    if residual > tol {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }
    Ok(PeriodicOrbit {
        points: crate::ode::series_from_states(opts.sample_dt, 0.0, &sampled),
        period,
        residual,
    })
}

/// A near-recurrence found while scanning a trajectory: segment start index
/// and return-time guess.
#[derive(Debug, Clone, Copy)]
pub struct RecurrenceSeed {
    pub start: usize,
    pub period_guess: f64,
    pub distance: f64,
}

/// Scan a long trajectory for `|x(t + T) - x(t)| < threshold` with
/// `T in [t_min, t_max]`, keeping local minima of the recurrence distance.
pub fn recurrence_seeds(
    trajectory: &TimeSeries,
    t_min: f64,
    t_max: f64,
    threshold: f64,
) -> Vec<RecurrenceSeed> {
    assert_eq!(trajectory.dim(), 3);
    let dt = trajectory.dt();
    let n = trajectory.len();
    let k_min = (t_min / dt).round() as usize;
    let k_max = (t_max / dt).round() as usize;
    let states: Vec<StateVec3> = crate::ode::series_states(trajectory).collect();
    let mut seeds = Vec::new();
    let stride = 25;
    let mut i = 0;
    while i + k_max < n {
        // Every local minimum of the return distance over the period window
        // is a candidate; a single best-k scan would hide short orbits
        // behind deeper long-period recurrences.
        let mut prev = (states[i + k_min] - states[i]).norm();
        let mut prev2 = f64::INFINITY;
        for k in k_min + 1..=k_max {
            let d = (states[i + k] - states[i]).norm();
            if prev < threshold && prev <= prev2 && prev < d {
                seeds.push(RecurrenceSeed {
                    start: i,
                    period_guess: (k - 1) as f64 * dt,
                    distance: prev,
                });
            }
            prev2 = prev;
            prev = d;
        }
        i += stride;
    }
    seeds.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    seeds
}

fn orbits_coincide(a: &PeriodicOrbit, b: &PeriodicOrbit) -> bool {
    // Mirror twins share the period exactly, so a period match alone is not
    // enough; compare point sets with a tolerance above the sample spacing
    // along the orbit (speed x dt) but far below inter-orbit separations.
    if (a.period - b.period).abs() > 1e-4 * b.period.max(1.0) {
        return false;
    }
    // Distance to the polyline of b, not to its samples: the sample spacing
    // reaches speed x dt, which is larger than inter-orbit separations.
    let pts_b: Vec<StateVec3> = crate::ode::series_states(&b.points).collect();
    let seg_dist = |p: StateVec3| -> f64 {
        let mut best = f64::INFINITY;
        for w in 0..pts_b.len() {
            let a0 = pts_b[w];
            let a1 = pts_b[(w + 1) % pts_b.len()];
            let d = a1 - a0;
            let len2 = d.dot(d);
            let t = if len2 > 0.0 {
                ((p - a0).dot(d) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            best = best.min((p - (a0 + d * t)).norm());
        }
        best
    };
    let mut worst = 0.0f64;
    for (i, p) in crate::ode::series_states(&a.points).enumerate() {
        if i % 10 != 0 {
            continue;
        }
        worst = worst.max(seg_dist(p));
    }
    worst < 0.3
}

/// Scan a trajectory and refine distinct periodic orbits, shortest first.
pub fn find_upos<F, J>(
    rhs: &F,
    jac: &J,
    trajectory: &TimeSeries,
    t_min: f64,
    t_max: f64,
    threshold: f64,
    max_orbits: usize,
    tol: f64,
    opts: UpoOptions,
) -> Vec<PeriodicOrbit>
where
    F: Fn(StateVec3) -> StateVec3,
    J: Fn(StateVec3) -> Matrix3<f64>,
{
    let seeds = recurrence_seeds(trajectory, t_min, t_max, threshold);
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    // Refining every recurrence would mostly rediscover known orbits.
    for seed in seeds.into_iter().take(600) {
        if orbits.len() >= max_orbits {
            break;
        }
        let n_seg = (seed.period_guess / trajectory.dt()).round() as usize + 1;
        if seed.start + n_seg > trajectory.len() {
            continue;
        }
        let segment = trajectory.window(seed.start, n_seg);
        let Ok(orbit) = find_upo(rhs, jac, &segment, seed.period_guess, tol, opts) else {
            continue;
        };
        // Reject retraced multiples and mirror-duplicates.
        if orbits.iter().any(|o| orbits_coincide(&orbit, o)) {
            continue;
        }
        orbits.push(orbit);
    }
    orbits.sort_by(|a, b| a.period.total_cmp(&b.period));
    orbits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{lorenz_jacobian, lorenz_rhs};
    use nalgebra::Matrix3;

    fn center_rhs(s: StateVec3) -> StateVec3 {
        StateVec3::new(-s.y, s.x, -s.z)
    }

    fn center_jac(_: StateVec3) -> Matrix3<f64> {
        Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0)
    }

    #[test]
    fn linear_center_circle_is_already_periodic() {
        let dt = 0.02;
        let n = (2.0 * std::f64::consts::PI / dt).ceil() as usize + 2;
        let mut seed = TimeSeries::new(3, dt, 0.0);
        for i in 0..n {
            let t = i as f64 * dt;
            seed.push(&[t.cos(), t.sin(), 0.0]);
        }
        let orbit = find_upo(
            &center_rhs,
            &center_jac,
            &seed,
            6.28,
            1e-9,
            UpoOptions::default(),
        )
        .unwrap();
        assert!(
            orbit.residual <= 1e-12,
            "closure residual {}",
            orbit.residual
        );
        assert!(
            (orbit.period - 2.0 * std::f64::consts::PI).abs() <= 1e-9,
            "period {}",
            orbit.period
        );
    }

    #[test]
    fn reintegration_returns_within_ten_residuals() {
        // Shortest Lorenz orbit, seeded from a recurrence of a real run.
        let rhs = |s| lorenz_rhs(s, 28.0);
        let jac = |s| lorenz_jacobian(s, 28.0);
        let traj = crate::ode::integrate(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.01, 60_000, 2_000)
            .unwrap();
        let orbits = find_upos(
            &rhs,
            &jac,
            &traj,
            1.2,
            2.0,
            0.7,
            1,
            1e-8,
            UpoOptions::default(),
        );
        assert!(!orbits.is_empty(), "no short orbit found");
        let o = &orbits[0];
        let p0 = StateVec3::from(o.points.sample(0));
        let back = flow(&rhs, p0, o.period, 1e-3);
        assert!((back - p0).norm() <= 10.0 * o.residual.max(1e-14));
        // Shortest Lorenz r=28 orbit has period ~1.5587.
        assert!((o.period - 1.5587).abs() < 5e-3, "period {}", o.period);
        // Tp within dt of points.len * dt.
        assert!((o.points.len() as f64 * o.points.dt() - o.period).abs() <= o.points.dt());
    }
}
