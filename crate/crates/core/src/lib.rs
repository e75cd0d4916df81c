//! Pseudospectral variational solver for periodic hydroelastic travelling
//! waves in conformal coordinates.

// Negated comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod geometry;
pub mod lagrangian;
pub mod optimizer;
pub mod residuals;
pub mod spectral;

pub use energy::{EnergyModel, IllustrativeEnergy, IllustrativeParams};
pub use spectral::Field;
