//! Degree-3 polynomial regression of a vector field and the Jacobian
//! matrices it implies.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::analysis::derivative::derivative6_all;
use crate::error::{Error, Result};
use crate::ode::StateVec3;
use crate::series::TimeSeries;

/// Number of monomials x^l y^m z^n with 0 <= l+m+n <= 3.
pub const N_MONOMIALS: usize = 20;

/// Monomial exponents (l, m, n) in graded lexicographic order with
/// x > y > z: degree 0 first, then within each degree lexicographic by
/// descending exponent of x, then y. This order is part of the coefficient
/// layout contract.
pub const MONOMIAL_POWERS: [(u8, u8, u8); N_MONOMIALS] = [
    (0, 0, 0),
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (2, 0, 0),
    (1, 1, 0),
    (1, 0, 1),
    (0, 2, 0),
    (0, 1, 1),
    (0, 0, 2),
    (3, 0, 0),
    (2, 1, 0),
    (2, 0, 1),
    (1, 2, 0),
    (1, 1, 1),
    (1, 0, 2),
    (0, 3, 0),
    (0, 2, 1),
    (0, 1, 2),
    (0, 0, 3),
];

/// Human-readable monomial name, e.g. `x^2*z`.
pub fn monomial_name(k: usize) -> String {
    let (l, m, n) = MONOMIAL_POWERS[k];
    if l == 0 && m == 0 && n == 0 {
        return "1".to_string();
    }
    let mut parts = Vec::new();
    for (sym, p) in [("x", l), ("y", m), ("z", n)] {
        match p {
            0 => {}
            1 => parts.push(sym.to_string()),
            _ => parts.push(format!("{sym}^{p}")),
        }
    }
    parts.join("*")
}

/// Index of the monomial with the given exponents.
pub fn monomial_index(l: u8, m: u8, n: u8) -> usize {
    MONOMIAL_POWERS
        .iter()
        .position(|&(a, b, c)| (a, b, c) == (l, m, n))
        .expect("exponents within degree 3")
}

fn monomials(p: StateVec3) -> [f64; N_MONOMIALS] {
    let (x, y, z) = (p.x, p.y, p.z);
    let mut out = [0.0; N_MONOMIALS];
    for (k, &(l, m, n)) in MONOMIAL_POWERS.iter().enumerate() {
        out[k] = x.powi(l as i32) * y.powi(m as i32) * z.powi(n as i32);
    }
    out
}

/// Regression coefficients of each velocity component on the degree-3
/// monomial basis, defining an estimated vector field and, by analytic
/// differentiation, the Jacobian J(x) anywhere in state space.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianField {
    /// `coeffs[c][k]` multiplies monomial k in component c.
    pub coeffs: [[f64; N_MONOMIALS]; 3],
    /// Per-component RMS residual of the fit.
    pub fit_residual: [f64; 3],
}

impl JacobianField {
    pub fn zero() -> Self {
        Self {
            coeffs: [[0.0; N_MONOMIALS]; 3],
            fit_residual: [0.0; 3],
        }
    }

    /// Estimated vector field at a point.
    pub fn rhs_at(&self, p: StateVec3) -> StateVec3 {
        let phi = monomials(p);
        let mut out = [0.0; 3];
        for (c, row) in self.coeffs.iter().enumerate() {
            out[c] = row.iter().zip(phi.iter()).map(|(a, b)| a * b).sum();
        }
        StateVec3::from(out)
    }

    /// Analytic gradient of the fitted polynomials at a point.
    pub fn jacobian_at(&self, p: StateVec3) -> Matrix3<f64> {
        let (x, y, z) = (p.x, p.y, p.z);
        let mut j = Matrix3::zeros();
        for (c, row) in self.coeffs.iter().enumerate() {
            for (k, &(l, m, n)) in MONOMIAL_POWERS.iter().enumerate() {
                let coeff = row[k];
                if coeff == 0.0 {
                    continue;
                }
                let (l, m, n) = (l as i32, m as i32, n as i32);
                if l > 0 {
                    j[(c, 0)] += coeff * l as f64 * x.powi(l - 1) * y.powi(m) * z.powi(n);
                }
                if m > 0 {
                    j[(c, 1)] += coeff * m as f64 * x.powi(l) * y.powi(m - 1) * z.powi(n);
                }
                if n > 0 {
                    j[(c, 2)] += coeff * n as f64 * x.powi(l) * y.powi(m) * z.powi(n - 1);
                }
            }
        }
        j
    }

    /// Mean Jacobian trace along a trajectory.
    pub fn mean_trace(&self, trajectory: &TimeSeries) -> f64 {
        let mut acc = 0.0;
        for s in crate::ode::series_states(trajectory) {
            acc += self.jacobian_at(s).trace();
        }
        acc / trajectory.len() as f64
    }
}

/// Fit the field from positions and the matching velocity estimates
/// (one velocity row per position row). Normal equations with column
/// scaling to unit RMS; the monomials span several orders of magnitude on
/// a chaotic attractor.
pub fn fit_jacobian_field_with_derivs(
    positions: &TimeSeries,
    velocities: &TimeSeries,
) -> Result<JacobianField> {
    assert_eq!(positions.dim(), 3);
    assert_eq!(velocities.dim(), 3);
    if positions.len() != velocities.len() {
        return Err(Error::DimensionMismatch {
            expected: positions.len(),
            got: velocities.len(),
        });
    }
    let n = positions.len();
    if n < N_MONOMIALS {
        return Err(Error::SeriesTooShort {
            needed: N_MONOMIALS,
            got: n,
        });
    }

    let mut gram = DMatrix::<f64>::zeros(N_MONOMIALS, N_MONOMIALS);
    let mut rhs = DMatrix::<f64>::zeros(N_MONOMIALS, 3);
    for (p, v) in crate::ode::series_states(positions).zip(velocities.samples()) {
        let phi = monomials(p);
        for a in 0..N_MONOMIALS {
            for b in a..N_MONOMIALS {
                gram[(a, b)] += phi[a] * phi[b];
            }
            for c in 0..3 {
                rhs[(a, c)] += phi[a] * v[c];
            }
        }
    }
    for a in 0..N_MONOMIALS {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    // Column scaling to unit RMS.
    let scales: Vec<f64> = (0..N_MONOMIALS)
        .map(|k| (gram[(k, k)] / n as f64).sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let mut scaled = gram.clone();
    for a in 0..N_MONOMIALS {
        for b in 0..N_MONOMIALS {
            scaled[(a, b)] /= scales[a] * scales[b];
        }
    }
    let chol = nalgebra::Cholesky::new(scaled.clone()).ok_or_else(|| {
        // Report which directions are deficient: eigenvectors of the scaled
        // normal matrix with near-zero eigenvalues.
        let eig = scaled.clone().symmetric_eigen();
        let tol = 1e-12 * eig.eigenvalues.amax();
        let mut degenerate = Vec::new();
        for (i, ev) in eig.eigenvalues.iter().enumerate() {
            if *ev <= tol {
                let vec = eig.eigenvectors.column(i);
                let mut dominant: Vec<(f64, usize)> = (0..N_MONOMIALS)
                    .map(|k| (vec[k].abs(), k))
                    .collect();
                dominant.sort_by(|a, b| b.0.total_cmp(&a.0));
                let names: Vec<String> = dominant
                    .iter()
                    .take(3)
                    .map(|&(_, k)| monomial_name(k))
                    .collect();
                degenerate.push(names.join(", "));
            }
        }
        Error::RankDeficient(format!(
            "trajectory does not excite all monomials; degenerate directions dominated by: [{}]",
            degenerate.join("; ")
        ))
    })?;

    let mut coeffs = [[0.0; N_MONOMIALS]; 3];
    for c in 0..3 {
        let mut b = DVector::<f64>::zeros(N_MONOMIALS);
        for a in 0..N_MONOMIALS {
            b[a] = rhs[(a, c)] / scales[a];
        }
        let sol = chol.solve(&b);
        for a in 0..N_MONOMIALS {
            coeffs[c][a] = sol[a] / scales[a];
        }
    }

    // Per-component RMS residual.
    let mut sq = [0.0f64; 3];
    for (p, v) in crate::ode::series_states(positions).zip(velocities.samples()) {
        let phi = monomials(p);
        for c in 0..3 {
            let pred: f64 = coeffs[c].iter().zip(phi.iter()).map(|(a, b)| a * b).sum();
            sq[c] += (pred - v[c]) * (pred - v[c]);
        }
    }
    let fit_residual = [
        (sq[0] / n as f64).sqrt(),
        (sq[1] / n as f64).sqrt(),
        (sq[2] / n as f64).sqrt(),
    ];

    Ok(JacobianField {
        coeffs,
        fit_residual,
    })
}

/// Estimate the Jacobian field of the (unknown) flow behind a sampled
/// trajectory: sixth-order finite differences for the velocities, then the
/// degree-3 polynomial regression. The three boundary samples lost to the
/// stencil at each end are dropped from the regression.
pub fn fit_jacobian_field(trajectory: &TimeSeries) -> Result<JacobianField> {
    let velocities = derivative6_all(trajectory)?;
    let positions = trajectory.window(3, trajectory.len() - 6);
    fit_jacobian_field_with_derivs(&positions, &velocities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{lorenz_rhs, rossler_rhs};

    fn lorenz_traj(n: usize) -> TimeSeries {
        let rhs = |s| lorenz_rhs(s, 28.0);
        crate::ode::integrate_fine(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.01, n, 3_000, 5).unwrap()
    }

    fn exact_velocities(traj: &TimeSeries, rhs: impl Fn(StateVec3) -> StateVec3) -> TimeSeries {
        let mut v = TimeSeries::with_capacity(3, traj.dt(), traj.t0(), traj.len());
        for s in crate::ode::series_states(traj) {
            v.push(&rhs(s).as_array());
        }
        v
    }

    #[test]
    fn recovers_lorenz_coefficients_from_exact_derivatives() {
        let traj = lorenz_traj(20_000);
        let vel = exact_velocities(&traj, |s| lorenz_rhs(s, 28.0));
        let field = fit_jacobian_field_with_derivs(&traj, &vel).unwrap();

        let mut expected = [[0.0; N_MONOMIALS]; 3];
        expected[0][monomial_index(1, 0, 0)] = -10.0;
        expected[0][monomial_index(0, 1, 0)] = 10.0;
        expected[1][monomial_index(1, 0, 0)] = 28.0;
        expected[1][monomial_index(0, 1, 0)] = -1.0;
        expected[1][monomial_index(1, 0, 1)] = -1.0;
        expected[2][monomial_index(1, 1, 0)] = 1.0;
        expected[2][monomial_index(0, 0, 1)] = -8.0 / 3.0;

        for c in 0..3 {
            for k in 0..N_MONOMIALS {
                assert!(
                    (field.coeffs[c][k] - expected[c][k]).abs() <= 1e-8,
                    "component {c}, monomial {}: {} vs {}",
                    monomial_name(k),
                    field.coeffs[c][k],
                    expected[c][k]
                );
            }
        }
    }

    #[test]
    fn recovers_lorenz_coefficients_from_stencil_derivatives() {
        // The stencil truncation bias scales as dt^6; at dt = 0.005 it sits
        // well below the 1e-4 target.
        let rhs = |s| lorenz_rhs(s, 28.0);
        let traj =
            crate::ode::integrate_fine(&rhs, StateVec3::new(1.0, 1.0, 1.0), 0.005, 40_000, 6_000, 2)
                .unwrap();
        let field = fit_jacobian_field(&traj).unwrap();
        assert!((field.coeffs[0][monomial_index(0, 1, 0)] - 10.0).abs() <= 1e-4);
        assert!((field.coeffs[1][monomial_index(1, 0, 1)] + 1.0).abs() <= 1e-4);
        assert!((field.coeffs[2][monomial_index(1, 1, 0)] - 1.0).abs() <= 1e-4);
        assert!((field.coeffs[2][monomial_index(0, 0, 1)] + 8.0 / 3.0).abs() <= 1e-4);
        // All degree-3 terms are absent from the true field.
        for c in 0..3 {
            for (k, &(l, m, n)) in MONOMIAL_POWERS.iter().enumerate() {
                if l + m + n == 3 {
                    assert!(
                        field.coeffs[c][k].abs() <= 1e-4,
                        "degree-3 term {} = {}",
                        monomial_name(k),
                        field.coeffs[c][k]
                    );
                }
            }
        }
    }

    #[test]
    fn rossler_field_from_stencil_derivatives() {
        let traj = crate::ode::integrate_fine(
            &rossler_rhs,
            StateVec3::new(1.0, 1.0, 1.0),
            0.025,
            200_000,
            4_000,
            2,
        )
        .unwrap();
        let field = fit_jacobian_field(&traj).unwrap();
        assert!(
            (field.coeffs[2][monomial_index(1, 0, 1)] - 1.0).abs() <= 1e-3,
            "xz coefficient {}",
            field.coeffs[2][monomial_index(1, 0, 1)]
        );
        assert!(
            (field.coeffs[2][monomial_index(0, 0, 0)] - 0.2).abs() <= 1e-3,
            "constant term {}",
            field.coeffs[2][monomial_index(0, 0, 0)]
        );
    }

    #[test]
    fn jacobian_at_origin_matches_analytic_lorenz() {
        let traj = lorenz_traj(20_000);
        let vel = exact_velocities(&traj, |s| lorenz_rhs(s, 28.0));
        let field = fit_jacobian_field_with_derivs(&traj, &vel).unwrap();
        let j = field.jacobian_at(StateVec3::zero());
        let expect = crate::ode::lorenz_jacobian(StateVec3::zero(), 28.0);
        assert!((j - expect).amax() <= 1e-6, "difference {}", (j - expect).amax());
    }

    #[test]
    fn zero_field_has_zero_jacobian() {
        let f = JacobianField::zero();
        let j = f.jacobian_at(StateVec3::new(3.0, -1.0, 2.0));
        assert!(j.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn recovers_random_cubic_fields_from_exact_derivatives() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let mut truth = [[0.0; N_MONOMIALS]; 3];
            for row in truth.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.gen_range(-2.0..2.0);
                }
            }
            let truth_field = JacobianField {
                coeffs: truth,
                fit_residual: [0.0; 3],
            };
            // A cloud of positions works; no trajectory structure needed.
            let mut pos = TimeSeries::new(3, 0.01, 0.0);
            let mut vel = TimeSeries::new(3, 0.01, 0.0);
            for _ in 0..500 {
                let p = StateVec3::new(
                    rng.gen_range(-1.5..1.5),
                    rng.gen_range(-1.5..1.5),
                    rng.gen_range(-1.5..1.5),
                );
                pos.push(&p.as_array());
                vel.push(&truth_field.rhs_at(p).as_array());
            }
            let fitted = fit_jacobian_field_with_derivs(&pos, &vel).unwrap();
            for c in 0..3 {
                for k in 0..N_MONOMIALS {
                    assert!(
                        (fitted.coeffs[c][k] - truth[c][k]).abs() <= 1e-6,
                        "coefficient {} of component {c}",
                        monomial_name(k)
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_trajectory_is_rejected_with_named_directions() {
        // A constant trajectory cannot excite the basis.
        let pos = TimeSeries::from_flat(3, 0.01, 0.0, vec![1.0, 2.0, 3.0].repeat(100));
        let vel = TimeSeries::from_flat(3, 0.01, 0.0, vec![0.0; 300]);
        match fit_jacobian_field_with_derivs(&pos, &vel) {
            Err(Error::RankDeficient(msg)) => {
                assert!(msg.contains("degenerate"), "message: {msg}");
            }
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }
}
