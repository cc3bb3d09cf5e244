//! Fixed points of a discrete-time system in output space: quasi-Newton
//! refinement of the one-step displacement followed by the long-horizon
//! drift acceptance test.

use nalgebra::{Complex, Matrix3, Vector3};

use crate::analysis::eigen::eigen3;
use crate::error::{Error, Result};
use crate::ode::{OdeSystem, StateVec3};
use crate::reservoir::ReservoirModel;
use crate::series::TimeSeries;

/// A discrete-time map on output space: the trajectory psi_x(n dt) started
/// from an arbitrary point x.
pub trait PointMap3 {
    fn step_dt(&self) -> f64;
    /// `[psi_x(dt), psi_x(2 dt), ..., psi_x(n dt)]`.
    fn trajectory(&self, x: StateVec3, n: usize) -> Result<Vec<StateVec3>>;
}

/// Time-dt map of a reference ODE system.
pub struct FlowMap {
    pub system: OdeSystem,
    pub dt: f64,
    pub substep: f64,
}

impl FlowMap {
    pub fn new(system: OdeSystem) -> Self {
        let dt = system.default_dt();
        Self {
            system,
            dt,
            substep: dt / 2.0,
        }
    }
}

impl PointMap3 for FlowMap {
    fn step_dt(&self) -> f64 {
        self.dt
    }

    fn trajectory(&self, x: StateVec3, n: usize) -> Result<Vec<StateVec3>> {
        let rhs = |s| self.system.rhs(s);
        let mut out = Vec::with_capacity(n);
        let mut s = x;
        for step in 0..n {
            s = crate::ode::flow(&rhs, s, self.dt, self.substep);
            if !s.is_finite() {
                return Err(Error::BlowUp { step });
            }
            out.push(s);
        }
        Ok(out)
    }
}

/// The trained model as a map on output space: the reservoir state behind a
/// point x is fixed by pre-iterating on the constant history at x, then the
/// closed loop runs freely.
pub struct ModelMap<'a> {
    pub model: &'a ReservoirModel,
    pub warmup: usize,
}

impl<'a> ModelMap<'a> {
    pub fn new(model: &'a ReservoirModel) -> Self {
        Self {
            model,
            warmup: crate::reservoir::DEFAULT_WARMUP,
        }
    }
}

impl PointMap3 for ModelMap<'_> {
    fn step_dt(&self) -> f64 {
        self.model.config.dt
    }

    fn trajectory(&self, x: StateVec3, n: usize) -> Result<Vec<StateVec3>> {
        let raw = self.model.raw_dim();
        assert_eq!(raw, 3, "output-space fixed points need 3 components");
        let d = self.model.delay_steps();
        let len = self.warmup + d + 1;
        let mut constant = TimeSeries::with_capacity(raw, self.model.config.dt, 0.0, len);
        for _ in 0..len {
            constant.push(&x.as_array());
        }
        let synced = self.model.synchronize_with(&constant, self.warmup)?;
        let series = self.model.run_autonomous(&synced, n)?;
        Ok(crate::ode::series_states(&series).collect())
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub point: StateVec3,
    /// Maximal drift over the n0-step validation run.
    pub delta: f64,
    /// Eigenvalues of the estimated Jacobian at the point, descending real
    /// part.
    pub eigenvalues: [Complex<f64>; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub max_iterations: usize,
    /// Forward-difference step, relative to 1 + |x|.
    pub fd_step: f64,
    /// Refinement target for the one-step displacement.
    pub g_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            max_iterations: 60,
            fd_step: 1e-5,
            g_tol: 1e-10,
        }
    }
}

/// Refine `guess` to a fixed point of `map` (damped quasi-Newton on the
/// one-step displacement with a finite-difference Jacobian), then validate
/// the drift criterion: delta = max_{n in [0, n0]} |x* - psi_{x*}(n dt)|
/// must stay below `eps0`. Eigenvalues come from `jac_at` (an estimated
/// Jacobian field or the analytic Jacobian).
pub fn find_fixed_point<M, J>(
    map: &M,
    jac_at: &J,
    guess: StateVec3,
    eps0: f64,
    n0: usize,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult>
where
    M: PointMap3,
    J: Fn(StateVec3) -> Matrix3<f64>,
{
    assert!(eps0 > 0.0 && n0 >= 1);
    let g = |x: StateVec3| -> Result<StateVec3> {
        let t = map.trajectory(x, 1)?;
        Ok(t[0] - x)
    };

    let mut x = guess;
    let mut gx = g(x)?;
    let mut gnorm = gx.norm();
    for _ in 0..opts.max_iterations {
        if gnorm <= opts.g_tol {
            break;
        }
        // Forward-difference Jacobian of g.
        let h = opts.fd_step * (1.0 + x.norm());
        let mut jg = Matrix3::zeros();
        for (col, e) in [
            StateVec3::new(h, 0.0, 0.0),
            StateVec3::new(0.0, h, 0.0),
            StateVec3::new(0.0, 0.0, h),
        ]
        .iter()
        .enumerate()
        {
            let gph = g(x + *e)?;
            let d = (gph - gx) * (1.0 / h);
            jg.set_column(col, &Vector3::new(d.x, d.y, d.z));
        }
        let rhs = Vector3::new(-gx.x, -gx.y, -gx.z);
        let step = jg
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::RankDeficient("singular quasi-Newton system".into()))?;
        let step = StateVec3::new(step.x, step.y, step.z);

        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..10 {
            let trial = x + step * lambda;
            if let Ok(gt) = g(trial) {
                let tn = gt.norm();
                if tn < gnorm {
                    x = trial;
                    gx = gt;
                    gnorm = tn;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }

    // Acceptance: maximal drift over n0 iterates (the n = 0 term is zero).
    let traj = map.trajectory(x, n0)?;
    let mut delta = 0.0f64;
    for p in &traj {
        delta = delta.max((*p - x).norm());
    }
    if delta >= eps0 {
        return Err(Error::NotAFixedPoint { delta, eps0 });
    }
    Ok(FixedPointResult {
        point: x,
        delta,
        eigenvalues: eigen3(&jac_at(x)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{lorenz_fixed_points, lorenz_jacobian};

    #[test]
    fn recovers_analytic_lorenz_fixed_points_through_the_flow_map() {
        let map = FlowMap::new(OdeSystem::lorenz28());
        let jac = |s| lorenz_jacobian(s, 28.0);
        let [origin, right, left] = lorenz_fixed_points(28.0);

        // Wing points: weakly unstable spirals, validated over a long run.
        for (truth, guess) in [
            (right, StateVec3::new(8.2, 8.7, 26.5)),
            (left, StateVec3::new(-8.7, -8.2, 27.5)),
        ] {
            let res = find_fixed_point(&map, &jac, guess, 0.01, 10_000, &FixedPointOptions::default())
                .unwrap();
            assert!(
                (res.point - truth).norm() < 1e-6,
                "found {:?}, expected {:?}",
                res.point,
                truth
            );
            // Complex pair ~0.09 +- 10.2i, real ~-13.85.
            assert!((res.eigenvalues[0].re - 0.094).abs() < 1e-2);
            assert!((res.eigenvalues[0].im - 10.19).abs() < 0.1);
            assert!((res.eigenvalues[2].re + 13.85).abs() < 0.01);
        }

        // The origin is strongly unstable: the paper-style budget (1, 30).
        let res = find_fixed_point(
            &map,
            &jac,
            StateVec3::new(0.3, -0.2, 0.4),
            1.0,
            30,
            &FixedPointOptions::default(),
        )
        .unwrap();
        assert!((res.point - origin).norm() < 1e-6);
        assert!((res.eigenvalues[0].re - 11.83).abs() < 0.01);
    }

    #[test]
    fn rejects_a_non_fixed_point() {
        let map = FlowMap::new(OdeSystem::lorenz28());
        let jac = |s| lorenz_jacobian(s, 28.0);
        // A generic attractor point is not a fixed point: after refinement
        // fails to produce one nearby, the drift test must reject it.
        let err = find_fixed_point(
            &map,
            &jac,
            StateVec3::new(3.0, 4.0, 15.0),
            1e-4,
            1000,
            &FixedPointOptions {
                max_iterations: 4,
                ..Default::default()
            },
        )
        .unwrap_err();
        match err {
            Error::NotAFixedPoint { delta, eps0 } => {
                assert!(delta >= eps0);
            }
            other => panic!("expected NotAFixedPoint, got {other:?}"),
        }
    }
}
