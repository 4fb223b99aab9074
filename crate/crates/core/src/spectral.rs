//! Frequency grids, unit conversions and discretized complex spectra.
//!
//! Every spectral function lives on a uniform grid of angular-frequency
//! detunings Ω (rad/fs) around a carrier wavelength. Integrals over Ω are
//! evaluated with the rectangle rule, which is spectrally accurate for
//! functions that have decayed to zero at the grid edges.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::{Error, Result};

/// Speed of light in nm/fs.
pub const SPEED_OF_LIGHT: f64 = 299.792458;

/// Time-bandwidth product of a transform-limited Gaussian pulse
/// (intensity FWHM in time times intensity FWHM in frequency).
pub const GAUSSIAN_TIME_BANDWIDTH: f64 = 0.441;

pub const MIN_GRID_POINTS: usize = 8;
pub const DEFAULT_GRID_POINTS: usize = 512;
pub const DEFAULT_SPAN_FACTOR: f64 = 4.0;

/// Converts a wavelength FWHM Δλ around λ₀ into an angular-frequency FWHM,
/// `2π c Δλ / λ₀²` in rad/fs.
pub fn fwhm_wavelength_to_angular(delta_lambda: f64, center_lambda: f64) -> Result<f64> {
    if !(center_lambda > 0.0) || !center_lambda.is_finite() {
        return Err(Error::invalid(format!(
            "center wavelength must be positive, got {center_lambda} nm"
        )));
    }
    if !(delta_lambda >= 0.0) || !delta_lambda.is_finite() {
        return Err(Error::invalid(format!(
            "wavelength width must be non-negative, got {delta_lambda} nm"
        )));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT * delta_lambda / (center_lambda * center_lambda))
}

/// Angular-frequency detuning (rad/fs) of `wavelength` from the carrier at
/// `center_lambda`. Positive detuning means bluer light.
pub fn wavelength_to_detuning(wavelength: f64, center_lambda: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * (1.0 / wavelength - 1.0 / center_lambda)
}

/// Uniform detuning grid, symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    center_wavelength: f64,
    spacing: f64,
    detunings: Vec<f64>,
}

impl FrequencyGrid {
    /// Grid of `n_points` detunings spanning `[-half_span, half_span]`.
    pub fn symmetric(center_wavelength: f64, half_span: f64, n_points: usize) -> Result<Self> {
        if !(center_wavelength > 0.0) || !center_wavelength.is_finite() {
            return Err(Error::invalid(format!(
                "center wavelength must be positive, got {center_wavelength} nm"
            )));
        }
        if !(half_span > 0.0) || !half_span.is_finite() {
            return Err(Error::invalid(format!(
                "grid half-span must be positive, got {half_span} rad/fs"
            )));
        }
        if n_points < MIN_GRID_POINTS {
            return Err(Error::invalid(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {n_points}"
            )));
        }
        let spacing = 2.0 * half_span / (n_points - 1) as f64;
        // Integer offsets times a half step keep the grid exactly symmetric.
        let half_step = 0.5 * spacing;
        let last = (n_points - 1) as i64;
        let detunings = (0..n_points as i64)
            .map(|k| (2 * k - last) as f64 * half_step)
            .collect();
        Ok(Self {
            center_wavelength,
            spacing,
            detunings,
        })
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }

    pub fn n_points(&self) -> usize {
        self.detunings.len()
    }

    /// Grid spacing in rad/fs.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    /// Largest |Ω| on the grid.
    pub fn half_span(&self) -> f64 {
        self.detunings[self.detunings.len() - 1]
    }

    pub fn is_compatible(&self, other: &FrequencyGrid) -> bool {
        self == other
    }
}

/// Builds the working grid for a simulation: it spans
/// `±span_factor × Δω_ref`, where Δω_ref is the angular FWHM of the reference
/// bandwidth at the center wavelength.
pub fn make_grid(
    center_wavelength: f64,
    reference_bandwidth_fwhm: f64,
    span_factor: f64,
    n_points: usize,
) -> Result<FrequencyGrid> {
    if !(reference_bandwidth_fwhm > 0.0) {
        return Err(Error::invalid(format!(
            "reference bandwidth must be positive, got {reference_bandwidth_fwhm} nm"
        )));
    }
    if !(span_factor >= 2.0) || !span_factor.is_finite() {
        return Err(Error::invalid(format!(
            "span factor must be at least 2, got {span_factor}"
        )));
    }
    let reference = fwhm_wavelength_to_angular(reference_bandwidth_fwhm, center_wavelength)?;
    FrequencyGrid::symmetric(center_wavelength, span_factor * reference, n_points)
}

/// Complex amplitudes sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    grid: Arc<FrequencyGrid>,
    amplitudes: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn new(grid: Arc<FrequencyGrid>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::invalid(format!(
                "{} amplitudes for a {}-point grid",
                amplitudes.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    /// Samples `f(Ω)` on every grid detuning.
    pub fn from_fn(grid: Arc<FrequencyGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.detunings().iter().map(|&w| f(w)).collect();
        Self { grid, amplitudes }
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// `Σ |a_k|² Δω`.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Copy rescaled to unit L2 norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateState(format!(
                "cannot normalize a spectral function of norm {norm:e}"
            )));
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// Pointwise product with `g(Ω)`.
    pub fn map_with_detuning(&self, g: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = self
            .grid
            .detunings()
            .iter()
            .zip(&self.amplitudes)
            .map(|(&w, a)| a * g(w))
            .collect();
        Self {
            grid: Arc::clone(&self.grid),
            amplitudes,
        }
    }

    /// Intensity-weighted mean detuning, `Σ Ω |a|² Δω / Σ |a|² Δω`.
    pub fn first_moment(&self) -> f64 {
        let (num, den) = self
            .grid
            .detunings()
            .iter()
            .zip(&self.amplitudes)
            .fold((0.0, 0.0), |(n, d), (&w, a)| {
                let p = a.norm_sqr();
                (n + w * p, d + p)
            });
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Discretized `∫ conj(f(Ω)) g(Ω) dΩ`.
pub fn inner_product(f: &SpectralFunction, g: &SpectralFunction) -> Result<Complex64> {
    if !f.grid.is_compatible(&g.grid) {
        return Err(Error::IncompatibleGrid);
    }
    let sum: Complex64 = f
        .amplitudes
        .iter()
        .zip(&g.amplitudes)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(sum * f.grid.spacing())
}

/// FWHM of a sampled non-negative profile, with linear interpolation of the
/// half-maximum crossings on either side of the peak. Returns `None` when the
/// profile does not fall below half maximum on both sides.
pub fn profile_fwhm(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (peak, &max) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(max > 0.0) {
        return None;
    }
    let half = 0.5 * max;
    let crossing = |i: usize, j: usize| {
        let t = (half - ys[i]) / (ys[j] - ys[i]);
        xs[i] + t * (xs[j] - xs[i])
    };
    let left = (0..peak).rev().find(|&i| ys[i] < half).map(|i| crossing(i, i + 1))?;
    let right = (peak + 1..ys.len()).find(|&i| ys[i] < half).map(|i| crossing(i, i - 1))?;
    Some(right - left)
}
