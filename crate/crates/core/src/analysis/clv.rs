//! Covariant Lyapunov vectors along a sampled orbit (forward QR pass,
//! backward triangular pass) and their manifold angles.

use nalgebra::{Matrix3, Vector3};

use crate::analysis::lyapunov::{qr_in_place, tangent_rk4};
use crate::error::{Error, Result};
use crate::ode::StateVec3;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy)]
pub struct ClvSettings {
    /// QR checkpoints every this many tangent RK4 steps (each spanning two
    /// orbit samples).
    pub renorm_interval: usize,
    /// Fraction of checkpoints discarded at each end (forward and backward
    /// transients).
    pub discard_fraction: f64,
    /// Condition limit for the triangular factors in the backward pass.
    pub max_condition: f64,
}

impl Default for ClvSettings {
    fn default() -> Self {
        Self {
            renorm_interval: 5,
            discard_fraction: 0.2,
            max_condition: 1e12,
        }
    }
}

/// Covariant Lyapunov vectors at the retained checkpoints, descending
/// exponent order (v1 most expanding, v3 most contracting).
#[derive(Debug, Clone)]
pub struct ClvSet {
    /// Time between checkpoints.
    pub checkpoint_dt: f64,
    pub times: Vec<f64>,
    pub positions: Vec<StateVec3>,
    pub vectors: Vec<[Vector3<f64>; 3]>,
    /// Worst covariance defect over the verification subsample: angle (deg)
    /// between a vector pushed through the tangent flow and the stored
    /// vector at the next checkpoint.
    pub covariance_max_angle_deg: f64,
}

impl ClvSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Angle in degrees, in (0, 90], between v1 and v3 at every point.
    pub fn angles_v1_v3(&self) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|v| angle_deg(&v[0], &v[2]))
            .collect()
    }

    /// Angle in degrees between the span of (v1, v2) and v3: the complement
    /// of the angle between v3 and the plane normal.
    pub fn angles_span12_v3(&self) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|v| {
                let normal = v[0].cross(&v[1]);
                let n = normal.norm();
                if n == 0.0 {
                    return 0.0;
                }
                let s = (v[2].dot(&normal).abs() / n).clamp(0.0, 1.0);
                s.asin().to_degrees()
            })
            .collect()
    }

    pub fn min_angle_v1_v3(&self) -> f64 {
        self.angles_v1_v3().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let c = (a.dot(b).abs() / (a.norm() * b.norm())).clamp(0.0, 1.0);
    c.acos().to_degrees()
}

/// Tangent propagator over one checkpoint interval starting at RK4 step
/// `step0` (orbit sample 2*step0).
fn interval_propagator<J>(
    orbit: &TimeSeries,
    jac: &J,
    step0: usize,
    n_steps: usize,
    h: f64,
) -> Matrix3<f64>
where
    J: Fn(StateVec3) -> Matrix3<f64>,
{
    let mut v = Matrix3::identity();
    for s in 0..n_steps {
        let i = 2 * (step0 + s);
        let j0 = jac(StateVec3::from(orbit.sample(i)));
        let j1 = jac(StateVec3::from(orbit.sample(i + 1)));
        let j2 = jac(StateVec3::from(orbit.sample(i + 2)));
        v = tangent_rk4(&j0, &j1, &j2, &v, h);
    }
    v
}

/// Ginelli-style covariant vectors: a forward pass stores the Q and R
/// factors at every checkpoint; a backward pass pulls upper-triangular
/// coefficient matrices through R^-1 with column normalization. The
/// transient ends are discarded.
pub fn covariant_lyapunov_vectors<J>(
    orbit: &TimeSeries,
    jac: &J,
    settings: &ClvSettings,
) -> Result<ClvSet>
where
    J: Fn(StateVec3) -> Matrix3<f64>,
{
    assert!(settings.renorm_interval >= 1);
    assert!((0.0..0.5).contains(&settings.discard_fraction));
    assert_eq!(orbit.dim(), 3);
    if orbit.len() < 2 * settings.renorm_interval + 1 {
        return Err(Error::SeriesTooShort {
            needed: 2 * settings.renorm_interval + 1,
            got: orbit.len(),
        });
    }
    let dt = orbit.dt();
    let h = 2.0 * dt;
    let n_rk = (orbit.len() - 1) / 2;
    let n_checkpoints = n_rk / settings.renorm_interval;
    if n_checkpoints < 8 {
        return Err(Error::SeriesTooShort {
            needed: 2 * settings.renorm_interval * 16 + 1,
            got: orbit.len(),
        });
    }
    // Forward pass: Q_k, R_k with Phi_k Q_{k-1} = Q_k R_k.
    let mut q = Matrix3::identity();
    let mut qs: Vec<Matrix3<f64>> = Vec::with_capacity(n_checkpoints);
    let mut rs: Vec<[f64; 6]> = Vec::with_capacity(n_checkpoints);
    for k in 0..n_checkpoints {
        let phi = interval_propagator(orbit, jac, k * settings.renorm_interval, settings.renorm_interval, h);
        let mut z = phi * q;
        let r = qr_full(&mut z)?;
        let cond = (r[0] / r[5].abs()).abs().max((r[0] / r[3].abs()).abs());
        if !cond.is_finite() || cond > settings.max_condition {
            return Err(Error::IllConditioned { cond });
        }
        q = z;
        qs.push(q);
        rs.push(r);
    }

    // Backward pass: C_{k-1} = R_k^{-1} C_k, columns normalized. R is
    // stored as [r11, r12, r13, r22, r23, r33] with positive diagonal.
    let mut c = Matrix3::<f64>::identity();
    let mut vectors_rev: Vec<[Vector3<f64>; 3]> = Vec::with_capacity(n_checkpoints);
    // Vectors at the last checkpoint come from C = I.
    vectors_rev.push(columns_normalized(&(qs[n_checkpoints - 1] * c)));
    for k in (1..n_checkpoints).rev() {
        c = solve_upper(&rs[k], &c);
        normalize_columns(&mut c);
        vectors_rev.push(columns_normalized(&(qs[k - 1] * c)));
    }
    vectors_rev.reverse();

    let discard = (n_checkpoints as f64 * settings.discard_fraction).floor() as usize;
    let keep_lo = discard.min(n_checkpoints.saturating_sub(1));
    let keep_hi = n_checkpoints - discard.min(n_checkpoints - keep_lo - 1);
    let checkpoint_dt = settings.renorm_interval as f64 * h;

    let mut times = Vec::with_capacity(keep_hi - keep_lo);
    let mut positions = Vec::with_capacity(keep_hi - keep_lo);
    let mut vectors = Vec::with_capacity(keep_hi - keep_lo);
    for k in keep_lo..keep_hi {
        // Checkpoint k sits after (k+1)*interval RK4 steps.
        let sample = 2 * (k + 1) * settings.renorm_interval;
        times.push(orbit.time_at(sample));
        positions.push(StateVec3::from(orbit.sample(sample)));
        vectors.push(vectors_rev[k]);
    }

    // Covariance spot check: push vectors one interval forward and compare
    // with the stored vectors at the next retained checkpoint.
    let mut covariance_max_angle_deg = 0.0f64;
    let stride = ((keep_hi - keep_lo) / 64).max(1);
    let mut idx = 0;
    while idx + 1 < keep_hi - keep_lo {
        let k = keep_lo + idx;
        let phi = interval_propagator(
            orbit,
            jac,
            (k + 1) * settings.renorm_interval,
            settings.renorm_interval,
            h,
        );
        for j in 0..3 {
            let pushed = phi * vectors[idx][j];
            let next = vectors[idx + 1][j];
            covariance_max_angle_deg = covariance_max_angle_deg.max(angle_deg(&pushed, &next));
        }
        idx += stride;
    }

    Ok(ClvSet {
        checkpoint_dt,
        times,
        positions,
        vectors,
        covariance_max_angle_deg,
    })
}

/// QR of a 3x3 matrix in place (columns become Q); returns the full upper
/// triangle of R as [r11, r12, r13, r22, r23, r33], diagonal positive.
fn qr_full(v: &mut Matrix3<f64>) -> Result<[f64; 6]> {
    let a = *v;
    let diag = qr_in_place(v)?;
    // R = Q^T A with exact diagonal from the factorization.
    let r = v.transpose() * a;
    Ok([diag[0], r[(0, 1)], r[(0, 2)], diag[1], r[(1, 2)], diag[2]])
}

/// Solve R X = C for upper-triangular R given in packed form.
fn solve_upper(r: &[f64; 6], c: &Matrix3<f64>) -> Matrix3<f64> {
    let (r11, r12, r13, r22, r23, r33) = (r[0], r[1], r[2], r[3], r[4], r[5]);
    let mut x = Matrix3::zeros();
    for col in 0..3 {
        let b0 = c[(0, col)];
        let b1 = c[(1, col)];
        let b2 = c[(2, col)];
        let x2 = b2 / r33;
        let x1 = (b1 - r23 * x2) / r22;
        let x0 = (b0 - r12 * x1 - r13 * x2) / r11;
        x[(0, col)] = x0;
        x[(1, col)] = x1;
        x[(2, col)] = x2;
    }
    x
}

fn normalize_columns(m: &mut Matrix3<f64>) {
    for j in 0..3 {
        let n = Vector3::from(m.column(j)).norm();
        if n > 0.0 {
            let col = Vector3::from(m.column(j)) / n;
            m.set_column(j, &col);
        }
    }
}

fn columns_normalized(m: &Matrix3<f64>) -> [Vector3<f64>; 3] {
    [0, 1, 2].map(|j| {
        let col = Vector3::from(m.column(j));
        let n = col.norm();
        if n > 0.0 {
            col / n
        } else {
            col
        }
    })
}
