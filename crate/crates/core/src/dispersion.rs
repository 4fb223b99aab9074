//! Group-velocity dispersion: the quadratic spectral phase ½·βL·Ω² and the
//! Gaussian pulse-broadening estimate.
//!
//! Phases are evaluated on the detuning Ω rather than the absolute optical
//! frequency; constant and linear-in-Ω terms only shift the photon in time
//! and are absorbed into the relative delay.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::schmidt::HeraldedState;
use crate::spectral::{fwhm_wavelength_to_angular, GAUSSIAN_TIME_BANDWIDTH};
use crate::{Error, Result};

/// Group velocity dispersion of fused silica at 780 nm, fs²/mm.
pub const FUSED_SILICA_BETA_780: f64 = 37.802;

/// A dispersive medium of group velocity dispersion `beta` (fs²/mm) and
/// length `length` (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersiveElement {
    beta: f64,
    length: f64,
}

impl DispersiveElement {
    pub fn new(beta: f64, length: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::invalid(format!("beta must be finite, got {beta}")));
        }
        if !(length >= 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!(
                "length must be non-negative, got {length} mm"
            )));
        }
        Ok(Self { beta, length })
    }

    /// Fused-silica fiber of the given length in mm.
    pub fn fiber(length: f64) -> Result<Self> {
        Self::new(FUSED_SILICA_BETA_780, length)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// βL in fs².
    pub fn beta_l(&self) -> f64 {
        self.beta * self.length
    }
}

/// θ(Ω) = ½·βL·Ω² in radians.
pub fn gvd_phase(detuning: f64, beta_l: f64) -> f64 {
    0.5 * beta_l * detuning * detuning
}

/// Multiplies every mode by exp(-i·θ(Ω)) and records the added βL.
pub fn apply_dispersion(state: &HeraldedState, element: &DispersiveElement) -> HeraldedState {
    apply_beta_l(state, element.beta_l())
}

/// [`apply_dispersion`] for a bare βL product in fs².
pub fn apply_beta_l(state: &HeraldedState, beta_l: f64) -> HeraldedState {
    if beta_l == 0.0 {
        return state.clone();
    }
    let modes = state
        .modes()
        .iter()
        .map(|m| m.map_with_detuning(|w| Complex64::from_polar(1.0, -gvd_phase(w, beta_l))))
        .collect();
    state.with_modes(modes, state.accumulated_dispersion() + beta_l)
}

/// Intensity FWHM (fs) of a transform-limited Gaussian pulse with the given
/// spectral FWHM in nm.
pub fn transform_limited_duration(bandwidth_fwhm: f64, center: f64) -> Result<f64> {
    if !(bandwidth_fwhm > 0.0) {
        return Err(Error::invalid(format!(
            "bandwidth must be positive, got {bandwidth_fwhm} nm"
        )));
    }
    let angular = fwhm_wavelength_to_angular(bandwidth_fwhm, center)?;
    Ok(2.0 * PI * GAUSSIAN_TIME_BANDWIDTH / angular)
}

/// Intensity FWHM in ps of a Gaussian pulse after accumulating `beta_l` fs²:
/// τ₀·√(1 + (4 ln2·βL/τ₀²)²). `input_duration` (fs) overrides the
/// transform-limited τ₀ derived from the bandwidth.
pub fn broadened_duration(
    bandwidth_fwhm: f64,
    center: f64,
    beta_l: f64,
    input_duration: Option<f64>,
) -> Result<f64> {
    let tl = transform_limited_duration(bandwidth_fwhm, center)?;
    let tau0 = match input_duration {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => {
            return Err(Error::invalid(format!(
                "input duration must be positive, got {t} fs"
            )))
        }
        None => tl,
    };
    let stretch = 4.0 * LN_2 * beta_l / (tau0 * tau0);
    Ok(tau0 * (1.0 + stretch * stretch).sqrt() / 1000.0)
}
