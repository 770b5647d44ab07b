//! Numerical laboratory for two wave equations coupled through velocities,
//! with localized Kelvin-Voigt damping on the first one.
//!
//! The pipeline is: [`geometry`] builds grids and coefficient fields,
//! [`operators`] assembles the block generator `A_h`, [`dynamics`] integrates
//! `U_t = A_h U` and fits energy decay laws, [`spectral`] handles the
//! constant-coefficient characteristic quartic and dense spectra, and
//! [`resolvent`] measures `‖(iλ − A_h)⁻¹‖` growth along the imaginary axis.
//! [`config`] and [`cli`] drive these from TOML files.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod operators;
pub mod resolvent;
pub mod spectral;

pub use error::{Error, Result};
