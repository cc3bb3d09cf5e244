//! Eigenvalues of real 3x3 matrices via the characteristic cubic.

use nalgebra::{Complex, Matrix3};

/// Roots of the characteristic polynomial of a real 3x3 matrix, sorted by
/// descending real part (a complex pair is exactly conjugate, positive
/// imaginary part first).
pub fn eigen3(m: &Matrix3<f64>) -> [Complex<f64>; 3] {
    // lambda^3 + a lambda^2 + b lambda + c.
    let tr = m.trace();
    let m2 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
        + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
    let det = m.determinant();
    let a = -tr;
    let b = m2;
    let c = -det;

    // Depressed cubic t^3 + p t + q with lambda = t - a/3.
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;

    let poly = |x: Complex<f64>| x * x * x + a * x * x + b * x + c;
    let dpoly = |x: Complex<f64>| 3.0 * x * x + 2.0 * a * x + b;
    let polish = |mut x: Complex<f64>| {
        for _ in 0..3 {
            let d = dpoly(x);
            if d.norm() < 1e-30 {
                break;
            }
            x -= poly(x) / d;
        }
        x
    };

    let discriminant = -4.0 * p * p * p - 27.0 * q * q;
    let mut roots: [Complex<f64>; 3];
    if discriminant >= 0.0 {
        // Three real roots, trigonometric form.
        if p >= 0.0 {
            // Only possible with p ~ 0 (triple/double root).
            let t = (-q).cbrt();
            roots = [Complex::new(t + shift, 0.0); 3];
        } else {
            let rho = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * rho)).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            roots = [0, 1, 2].map(|k| {
                let t = rho * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
                Complex::new(t + shift, 0.0)
            });
        }
        for r in roots.iter_mut() {
            let polished = polish(*r);
            // Real roots stay real.
            *r = Complex::new(polished.re, 0.0);
        }
    } else {
        // One real root (Cardano with a stable sign choice), then the exact
        // conjugate pair from the deflated quadratic.
        let half_q = q / 2.0;
        let disc = (half_q * half_q + p * p * p / 27.0).sqrt();
        let u = if half_q >= 0.0 {
            -(half_q + disc).cbrt()
        } else {
            (-half_q + disc).cbrt()
        };
        let v = if u == 0.0 { 0.0 } else { -p / (3.0 * u) };
        let mut real_root = u + v + shift;
        real_root = polish(Complex::new(real_root, 0.0)).re;
        // Deflate: lambda^2 + B lambda + C.
        let bq = a + real_root;
        let cq = b + real_root * bq;
        let quad_disc = bq * bq - 4.0 * cq;
        // quad_disc < 0 by construction here.
        let im = (-quad_disc).max(0.0).sqrt() / 2.0;
        let re = -bq / 2.0;
        roots = [
            Complex::new(real_root, 0.0),
            Complex::new(re, im),
            Complex::new(re, -im),
        ];
    }

    roots.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{lorenz_jacobian, StateVec3};
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_has_triple_unit_eigenvalue() {
        let e = eigen3(&Matrix3::identity());
        for v in e {
            assert!((v.re - 1.0).abs() < 1e-12 && v.im == 0.0);
        }
    }

    #[test]
    fn lorenz_origin_eigenvalues() {
        let j = lorenz_jacobian(StateVec3::zero(), 28.0);
        let e = eigen3(&j);
        // Analytic: (-11 +- sqrt(1201))/2 and -8/3.
        let s = 1201f64.sqrt();
        assert!((e[0].re - (-11.0 + s) / 2.0).abs() < 1e-10);
        assert!((e[1].re + 8.0 / 3.0).abs() < 1e-10);
        assert!((e[2].re - (-11.0 - s) / 2.0).abs() < 1e-10);
        // Matches the tabulated (11.83, -2.67, -22.83) within 0.01.
        assert!((e[0].re - 11.83).abs() < 0.01);
        assert!((e[1].re + 2.67).abs() < 0.01);
        assert!((e[2].re + 22.83).abs() < 0.01);
    }

    #[test]
    fn lorenz_wing_eigenvalues_are_a_conjugate_pair() {
        let c = 72.0f64.sqrt();
        let j = lorenz_jacobian(StateVec3::new(-c, -c, 27.0), 28.0);
        let e = eigen3(&j);
        assert!((e[0].re - 0.09).abs() < 0.01, "re {}", e[0].re);
        assert!((e[0].im - 10.20).abs() < 0.01, "im {}", e[0].im);
        // Exact conjugates.
        assert_eq!(e[0].re, e[1].re);
        assert_eq!(e[0].im, -e[1].im);
        assert!((e[2].re + 13.85).abs() < 0.01, "re {}", e[2].re);
        assert!(e[2].im == 0.0);
    }

    #[test]
    fn matches_dense_eigensolver_on_random_matrices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for trial in 0..200 {
            let m = Matrix3::from_fn(|_, _| rng.gen_range(-5.0..5.0));
            let ours = eigen3(&m);
            let mut reference: Vec<Complex<f64>> =
                m.complex_eigenvalues().iter().cloned().collect();
            reference.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
            for (o, r) in ours.iter().zip(reference.iter()) {
                let scale = 1.0 + r.norm();
                assert!(
                    (o - r).norm() <= 1e-9 * scale,
                    "trial {trial}: {o} vs {r} for {m}"
                );
            }
        }
    }
}
