//! Dynamical-system diagnostics: Jacobian-field estimation, fixed points
//! and eigenvalues, Lyapunov spectra, covariant Lyapunov vectors and
//! manifold angles, periodic-orbit shadowing, invariant densities and
//! laminar lasting times.

pub mod clv;
pub mod derivative;
pub mod eigen;
pub mod fixed_point;
pub mod hist;
pub mod lyapunov;
pub mod poly;
pub mod shadow;
pub mod wolf;

pub use clv::{covariant_lyapunov_vectors, ClvSet, ClvSettings};
pub use derivative::{derivative6, derivative6_all};
pub use eigen::eigen3;
pub use fixed_point::{
    find_fixed_point, FixedPointOptions, FixedPointResult, FlowMap, ModelMap, PointMap3,
};
pub use hist::{
    coverage_fraction, density_histogram, density_l1, ks_distance, laminar_lasting_times,
    log_edges, poincare_like_section, uniform_edges, write_section_csv, Histogram,
    LaminarDistribution,
};
pub use lyapunov::{kaplan_yorke, lyapunov_spectrum, LyapunovReport};
pub use poly::{
    fit_jacobian_field, fit_jacobian_field_with_derivs, monomial_index, monomial_name,
    JacobianField, MONOMIAL_POWERS, N_MONOMIALS,
};
pub use shadow::{self_shadow, shadow_batch, shadow_periodic_orbit};
pub use wolf::{wolf_lambda1, WolfEstimate, WolfParams};

/// Empirical angle histogram over one-degree bins spanning (0, 90].
pub fn angle_distribution(angles_deg: &[f64], bins: usize) -> Histogram {
    Histogram::from_values(angles_deg.iter().copied(), uniform_edges(0.0, 90.0, bins))
}
