//! Reservoir-computing surrogate models of chaotic ODEs, plus the
//! dynamical-system diagnostics used to compare a trained model with the
//! system that generated its training data: invariant densities, fixed
//! points and their stabilities, periodic-orbit shadowing, Lyapunov spectra,
//! covariant Lyapunov vectors and manifold-angle statistics.

pub mod error;
pub use nalgebra;

pub mod analysis;
pub mod ode;
pub mod reservoir;
pub mod util;
pub mod series;

pub use error::{Error, Result};
pub use ode::{OdeSystem, StateVec3};
pub use series::TimeSeries;
