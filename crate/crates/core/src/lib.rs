//! Simultaneous position and attitude estimation of a single planar coil from
//! the rms voltages induced by a constellation of beacon coils.
//!
//! The crate is organized bottom-up:
//!
//! - [`field`]: point-dipole model of the beacons and the induced voltage.
//! - [`measurement`]: AWGN measurement synthesis, SNR and selection policies.
//! - [`estimator`]: least-squares cost and a Nelder-Mead fit over five pose
//!   parameters.
//! - [`constellation`]: beacon grids, mobile-pose grids and beacon
//!   perturbations.
//! - [`montecarlo`]: seeded experiment runner and error statistics.

pub mod constellation;
pub mod error;
pub mod estimator;
pub mod field;
pub mod measurement;
pub mod montecarlo;

pub use error::{Error, Result};
