//! Numerical model of Hong-Ou-Mandel interference between independent
//! heralded single photons that travel through dispersive media.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`spectral`]: detuning grids, unit conversions, discretized spectra.
//! * [`source`]: SPDC joint spectral amplitude and bandpass filtering.
//! * [`schmidt`]: SVD-based Schmidt decomposition and heralded states.
//! * [`dispersion`]: group-velocity-dispersion phases and pulse broadening.
//! * [`hom`]: two-photon coincidence probability, delay scans, dip fits.
//! * [`network`]: multi-path interferometers, cancellation checks and
//!   few-photon coincidence simulation.
//! * [`cli`]: scenario files, presets and the run driver behind `sim`.
//!
//! Internal units are fs, rad/fs (detuning from the carrier), nm and mm;
//! `beta` is in fs²/mm so that `beta * length` is in fs².

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dispersion;
mod error;
pub mod hom;
pub mod network;
pub mod schmidt;
pub mod source;
pub mod spectral;

pub use error::{Error, FitInit, Result};

pub use num_complex::Complex64;
