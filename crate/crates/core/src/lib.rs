//! Modeling and data analysis for superconducting Fabry-Perot microwave resonators.
//!
//! - [`resonator_modes`]: paraxial mode geometry and spectrum of a symmetric
//!   cavity with toroidal mirrors.
//! - [`loss_budget`]: quality factors, damping times and the BCS thermal model.
//! - [`ringdown`]: atomic-probe ring-down simulation and damping-time estimators.
//! - [`fit_engine`]: weighted Levenberg-Marquardt least squares.
//! - [`cli_io`]: file formats, reports and the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod cli_io;
pub mod error;
pub mod fit_engine;
pub mod loss_budget;
pub mod resonator_modes;
pub mod ringdown;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
