//! Blind calibration of unknown complex sensor gains in compressive sensing.
//!
//! Multiple sparse signals `x_ℓ` are observed through a known sensing matrix whose
//! rows are distorted by unknown per-sensor gains `d_i e^{jθ_i}`. This crate recovers
//! the signals and the gains jointly with convex programs solved by consensus ADMM:
//!
//! * [`solvers::solve_acal`]: linear re-parameterization with inverse gains (amplitude calibration),
//! * [`solvers::solve_pcal`] / [`solvers::solve_pcal_scalable`]: lifted semidefinite programs on
//!   cross measurements (phase calibration),
//! * [`solvers::solve_ccal`] / [`solvers::solve_ccal_scalable`]: lifted programs with inverse squared
//!   amplitudes (complete calibration),
//!
//! plus a calibrated basis-pursuit baseline, an over-determined closed-form solver, an instance
//! generator, recovery metrics and a Monte-Carlo phase-transition harness.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod solvers;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
