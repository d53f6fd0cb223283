//! Causal Wiener estimation for continuously measured linear quantum systems.
//!
//! The crate synthesizes causal Wiener filters by spectral factorization,
//! evaluates estimation-error spectra and variances, and checks that the
//! errors of causal estimates of conjugate observables keep the Heisenberg
//! floor, with and without feedback.

pub mod commute;
pub mod error;
pub mod feedback;
pub mod mc;
pub mod models;
pub mod ratpoly;
pub mod specfact;
pub mod wiener;

pub use error::{Error, Result};
pub use num_complex::Complex64;
