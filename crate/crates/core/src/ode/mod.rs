//! Reference continuous-time systems and fixed-step integration.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub mod upo;

/// Three-dimensional state of the reference systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl StateVec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for StateVec3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<&[f64]> for StateVec3 {
    fn from(a: &[f64]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl std::ops::Add for StateVec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for StateVec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for StateVec3 {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self::new(self.x * c, self.y * c, self.z * c)
    }
}

/// Lorenz vector field with sigma = 10, b = 8/3 and free parameter `r`.
pub fn lorenz_rhs(s: StateVec3, r: f64) -> StateVec3 {
    StateVec3::new(
        10.0 * (s.y - s.x),
        r * s.x - s.y - s.x * s.z,
        s.x * s.y - 8.0 / 3.0 * s.z,
    )
}

pub fn lorenz_jacobian(s: StateVec3, r: f64) -> Matrix3<f64> {
    Matrix3::new(
        -10.0,
        10.0,
        0.0,
        r - s.z,
        -1.0,
        -s.x,
        s.y,
        s.x,
        -8.0 / 3.0,
    )
}

/// Analytic Lorenz fixed points: the origin and the pair
/// (±sqrt(8(r-1)/3), ±sqrt(8(r-1)/3), r-1).
pub fn lorenz_fixed_points(r: f64) -> [StateVec3; 3] {
    let c = (8.0 * (r - 1.0) / 3.0).sqrt();
    [
        StateVec3::zero(),
        StateVec3::new(c, c, r - 1.0),
        StateVec3::new(-c, -c, r - 1.0),
    ]
}

/// Roessler vector field with a = b = 0.2, c = 5.7.
pub fn rossler_rhs(s: StateVec3) -> StateVec3 {
    StateVec3::new(
        -s.y - s.z,
        s.x + 0.2 * s.y,
        0.2 + (s.x - 5.7) * s.z,
    )
}

pub fn rossler_jacobian(s: StateVec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, -1.0, 1.0, 0.2, 0.0, s.z, 0.0, s.x - 5.7)
}

/// One of the reference systems, with its standard ground-truth step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeSystem {
    Lorenz { r: f64 },
    Rossler,
}

impl OdeSystem {
    pub fn lorenz28() -> Self {
        OdeSystem::Lorenz { r: 28.0 }
    }

    pub fn lorenz60() -> Self {
        OdeSystem::Lorenz { r: 60.0 }
    }

    pub fn rhs(&self, s: StateVec3) -> StateVec3 {
        match *self {
            OdeSystem::Lorenz { r } => lorenz_rhs(s, r),
            OdeSystem::Rossler => rossler_rhs(s),
        }
    }

    pub fn jacobian(&self, s: StateVec3) -> Matrix3<f64> {
        match *self {
            OdeSystem::Lorenz { r } => lorenz_jacobian(s, r),
            OdeSystem::Rossler => rossler_jacobian(s),
        }
    }

    /// Ground-truth integration step: 0.01 for Lorenz, 0.05 for Roessler.
    pub fn default_dt(&self) -> f64 {
        match self {
            OdeSystem::Lorenz { .. } => 0.01,
            OdeSystem::Rossler => 0.05,
        }
    }

    pub fn default_initial(&self) -> StateVec3 {
        match self {
            OdeSystem::Lorenz { .. } => StateVec3::new(1.0, 1.0, 1.0),
            OdeSystem::Rossler => StateVec3::new(1.0, 1.0, 1.0),
        }
    }

    pub fn name(&self) -> String {
        match self {
            OdeSystem::Lorenz { r } => format!("lorenz(r={r})"),
            OdeSystem::Rossler => "rossler".to_string(),
        }
    }
}

/// Classical four-stage fourth-order Runge-Kutta step.
pub fn rk4_step<F>(rhs: &F, s: StateVec3, dt: f64) -> StateVec3
where
    F: Fn(StateVec3) -> StateVec3,
{
    let k1 = rhs(s);
    let k2 = rhs(s + k1 * (dt / 2.0));
    let k3 = rhs(s + k2 * (dt / 2.0));
    let k4 = rhs(s + k3 * dt);
    s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// RK4 step together with the exact Jacobian of the discrete step map,
/// obtained by differentiating every stage.
pub fn rk4_step_with_tangent<F, J>(
    rhs: &F,
    jac: &J,
    s: StateVec3,
    dt: f64,
) -> (StateVec3, Matrix3<f64>)
where
    F: Fn(StateVec3) -> StateVec3,
    J: Fn(StateVec3) -> Matrix3<f64>,
{
    let eye = Matrix3::identity();
    let k1 = rhs(s);
    let d1 = jac(s);
    let s2 = s + k1 * (dt / 2.0);
    let k2 = rhs(s2);
    let d2 = jac(s2) * (eye + d1 * (dt / 2.0));
    let s3 = s + k2 * (dt / 2.0);
    let k3 = rhs(s3);
    let d3 = jac(s3) * (eye + d2 * (dt / 2.0));
    let s4 = s + k3 * dt;
    let k4 = rhs(s4);
    let d4 = jac(s4) * (eye + d3 * dt);
    let next = s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let tangent = eye + (d1 + d2 * 2.0 + d3 * 2.0 + d4) * (dt / 6.0);
    (next, tangent)
}

/// Integrate for total time `t` using substeps no longer than `h_max`.
pub fn flow<F>(rhs: &F, s0: StateVec3, t: f64, h_max: f64) -> StateVec3
where
    F: Fn(StateVec3) -> StateVec3,
{
    if t == 0.0 {
        return s0;
    }
    let n = (t.abs() / h_max).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let mut s = s0;
    for _ in 0..n {
        s = rk4_step(rhs, s, h);
    }
    s
}

/// Like [`flow`], also propagating the tangent map of the composite step.
pub fn flow_with_tangent<F, J>(
    rhs: &F,
    jac: &J,
    s0: StateVec3,
    t: f64,
    h_max: f64,
) -> (StateVec3, Matrix3<f64>)
where
    F: Fn(StateVec3) -> StateVec3,
    J: Fn(StateVec3) -> Matrix3<f64>,
{
    let mut tangent = Matrix3::identity();
    if t == 0.0 {
        return (s0, tangent);
    }
    let n = (t.abs() / h_max).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let mut s = s0;
    for _ in 0..n {
        let (next, dstep) = rk4_step_with_tangent(rhs, jac, s, h);
        tangent = dstep * tangent;
        s = next;
    }
    (s, tangent)
}

/// Integrate and stream every recorded state into `sink` instead of storing
/// the trajectory. `sink` receives `(sample_index, state)` for the `n_steps`
/// recorded samples after `n_transient` discarded steps; sample 0 is the
/// state right after the transient.
pub fn integrate_with<F, S>(
    rhs: &F,
    s0: StateVec3,
    dt: f64,
    n_steps: usize,
    n_transient: usize,
    mut sink: S,
) -> Result<StateVec3>
where
    F: Fn(StateVec3) -> StateVec3,
    S: FnMut(usize, StateVec3),
{
    assert!(dt > 0.0, "dt must be positive");
    assert!(n_steps >= 1, "need at least one recorded sample");
    let mut s = s0;
    for step in 0..n_transient {
        s = rk4_step(rhs, s, dt);
        if !s.is_finite() {
            return Err(Error::BlowUp { step });
        }
    }
    sink(0, s);
    for i in 1..n_steps {
        s = rk4_step(rhs, s, dt);
        if !s.is_finite() {
            return Err(Error::BlowUp {
                step: n_transient + i,
            });
        }
        sink(i, s);
    }
    Ok(s)
}

/// Like [`integrate`], but with `substeps` RK4 stages per recorded sample.
/// Sampling-grade trajectories from [`integrate`] carry per-step local
/// errors around h^5 f^(5)/120, which is too rough for sixth-order
/// finite-difference derivatives; a few substeps push that below the
/// stencil truncation error.
pub fn integrate_fine<F>(
    rhs: &F,
    s0: StateVec3,
    dt: f64,
    n_steps: usize,
    n_transient: usize,
    substeps: usize,
) -> Result<TimeSeries>
where
    F: Fn(StateVec3) -> StateVec3,
{
    assert!(substeps >= 1);
    let h = dt / substeps as f64;
    let mut out = TimeSeries::with_capacity(3, dt, 0.0, n_steps);
    let mut s = s0;
    for step in 0..n_transient + n_steps {
        if step >= n_transient {
            out.push(&s.as_array());
        }
        if step + 1 == n_transient + n_steps {
            break;
        }
        for _ in 0..substeps {
            s = rk4_step(rhs, s, h);
        }
        if !s.is_finite() {
            return Err(Error::BlowUp { step });
        }
    }
    Ok(out)
}

/// Integrate, discard `n_transient` steps, then record `n_steps` samples at
/// spacing `dt`. With `n_transient = 0` the first recorded sample is `s0`.
pub fn integrate<F>(
    rhs: &F,
    s0: StateVec3,
    dt: f64,
    n_steps: usize,
    n_transient: usize,
) -> Result<TimeSeries>
where
    F: Fn(StateVec3) -> StateVec3,
{
    let mut out = TimeSeries::with_capacity(3, dt, 0.0, n_steps);
    integrate_with(rhs, s0, dt, n_steps, n_transient, |_, s| {
        out.push(&s.as_array());
    })?;
    Ok(out)
}

/// States of a 3-component series, for analysis passes.
pub fn series_states(series: &TimeSeries) -> impl Iterator<Item = StateVec3> + '_ {
    assert_eq!(series.dim(), 3);
    series.samples().map(StateVec3::from)
}

pub fn series_from_states(dt: f64, t0: f64, states: &[StateVec3]) -> TimeSeries {
    let mut s = TimeSeries::with_capacity(3, dt, t0, states.len());
    for p in states {
        s.push(&p.as_array());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorenz_rhs_known_values() {
        // Origin is a fixed point.
        let f = lorenz_rhs(StateVec3::zero(), 28.0);
        assert_eq!(f.as_array(), [0.0, 0.0, 0.0]);
        // Analytic wing fixed point.
        let c = 72.0f64.sqrt();
        let f = lorenz_rhs(StateVec3::new(c, c, 27.0), 28.0);
        assert!(f.norm() < 1e-12, "wing fixed point residual {}", f.norm());
        // Hand evaluation at (1,2,3).
        let f = lorenz_rhs(StateVec3::new(1.0, 2.0, 3.0), 28.0);
        assert!((f.x - 10.0).abs() < 1e-14);
        assert!((f.y - 23.0).abs() < 1e-14);
        assert!((f.z + 6.0).abs() < 1e-14);
    }

    #[test]
    fn lorenz_analytic_fixed_points_are_roots() {
        for r in [28.0, 60.0] {
            for p in lorenz_fixed_points(r) {
                assert!(lorenz_rhs(p, r).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rossler_rhs_known_values() {
        let f = rossler_rhs(StateVec3::zero());
        assert_eq!(f.as_array(), [0.0, 0.0, 0.2]);
        // Hand evaluation at (1,1,1).
        let f = rossler_rhs(StateVec3::new(1.0, 1.0, 1.0));
        assert!((f.x + 2.0).abs() < 1e-14);
        assert!((f.y - 1.2).abs() < 1e-14);
        assert!((f.z + 4.5).abs() < 1e-14);
        // Inner fixed point x = (c - sqrt(c^2 - 4ab)) / 2 etc.
        let d = (5.7f64 * 5.7 - 4.0 * 0.2 * 0.2).sqrt();
        let p = StateVec3::new((5.7 - d) / 2.0, -(5.7 - d) / (2.0 * 0.2), (5.7 - d) / (2.0 * 0.2));
        assert!((p.x - 0.0070).abs() < 5e-4);
        assert!((p.y + 0.0351).abs() < 5e-4);
        assert!((p.z - 0.0351).abs() < 5e-4);
        assert!(rossler_rhs(p).norm() < 1e-12);
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let rhs = |s: StateVec3| StateVec3::new(-s.x, 0.0, 0.0);
        let s = rk4_step(&rhs, StateVec3::new(1.0, 0.0, 0.0), 0.01);
        assert!((s.x - (-0.01f64).exp()).abs() <= 1e-10);
    }

    #[test]
    fn rk4_identity_for_zero_field() {
        let rhs = |_: StateVec3| StateVec3::zero();
        let s0 = StateVec3::new(4.0, -5.0, 6.0);
        assert_eq!(rk4_step(&rhs, s0, 0.3), s0);
    }

    #[test]
    fn rk4_order_is_four() {
        // Halving dt reduces the one-step error of dx/dt = -x by ~2^5.
        let rhs = |s: StateVec3| StateVec3::new(-s.x, 0.0, 0.0);
        let err = |dt: f64| {
            let s = rk4_step(&rhs, StateVec3::new(1.0, 0.0, 0.0), dt);
            (s.x - (-dt).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(
            (28.0..=36.0).contains(&ratio),
            "error ratio {ratio} outside [28, 36]"
        );
    }

    #[test]
    fn lorenz_long_run_stays_in_box() {
        let rhs = |s| lorenz_rhs(s, 28.0);
        let mut ok = true;
        integrate_with(
            &rhs,
            StateVec3::new(1.0, 1.0, 1.0),
            0.01,
            1_000_000,
            0,
            |_, s| {
                ok &= s.x.abs() <= 25.0 && s.y.abs() <= 35.0 && (0.0..=60.0).contains(&s.z);
            },
        )
        .unwrap();
        assert!(ok, "trajectory left the attractor bounding box");
    }

    #[test]
    fn integrate_zero_field_is_constant() {
        let rhs = |_: StateVec3| StateVec3::zero();
        let s = integrate(&rhs, StateVec3::new(1.0, 2.0, 3.0), 0.1, 5, 7).unwrap();
        assert_eq!(s.len(), 5);
        for row in s.samples() {
            assert_eq!(row, &[1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn integrate_without_transient_starts_at_s0() {
        let rhs = |s| lorenz_rhs(s, 28.0);
        let s0 = StateVec3::new(1.0, 1.0, 1.0);
        let s = integrate(&rhs, s0, 0.01, 10, 0).unwrap();
        assert_eq!(StateVec3::from(s.sample(0)), s0);
    }

    #[test]
    fn blow_up_reports_step() {
        // dx/dt = x^2 from x = 1 blows up near t = 1.
        let rhs = |s: StateVec3| StateVec3::new(s.x * s.x, 0.0, 0.0);
        let err = integrate(&rhs, StateVec3::new(1.0, 0.0, 0.0), 0.05, 100, 0).unwrap_err();
        match err {
            Error::BlowUp { step } => assert!(step > 10 && step < 40, "step {step}"),
            other => panic!("expected BlowUp, got {other:?}"),
        }
    }

    #[test]
    fn tangent_map_matches_finite_differences() {
        let rhs = |s| lorenz_rhs(s, 28.0);
        let jac = |s| lorenz_jacobian(s, 28.0);
        let s0 = StateVec3::new(3.0, -2.0, 21.0);
        let (_, tangent) = flow_with_tangent(&rhs, &jac, s0, 0.2, 0.01);
        let h = 1e-6;
        for (col, e) in [
            StateVec3::new(h, 0.0, 0.0),
            StateVec3::new(0.0, h, 0.0),
            StateVec3::new(0.0, 0.0, h),
        ]
        .iter()
        .enumerate()
        {
            let plus = flow(&rhs, s0 + *e, 0.2, 0.01);
            let minus = flow(&rhs, s0 + *e * -1.0, 0.2, 0.01);
            let fd = (plus - minus) * (1.0 / (2.0 * h));
            let col_v = tangent.column(col);
            for (i, fd_i) in fd.as_array().iter().enumerate() {
                assert!(
                    (col_v[i] - fd_i).abs() < 1e-5 * (1.0 + fd_i.abs()),
                    "tangent[{i},{col}] = {} vs fd {}",
                    col_v[i],
                    fd_i
                );
            }
        }
    }
}
