//! SPDC joint spectral amplitude: pump envelope times phase matching,
//! optionally shaped by bandpass filters on the signal and idler arms.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::schmidt::Truncation;
use crate::spectral::{
    fwhm_wavelength_to_angular, make_grid, wavelength_to_detuning, FrequencyGrid,
    DEFAULT_GRID_POINTS, DEFAULT_SPAN_FACTOR, GAUSSIAN_TIME_BANDWIDTH,
};
use crate::{Error, Result};

/// Coefficient of the Gaussian approximation sinc(x) ≈ exp(-γx²).
pub const SINC_GAUSSIAN_GAMMA: f64 = 0.193;

/// Amplitude norms below this are treated as annihilated by the filters.
const MIN_NORM: f64 = 1e-15;

/// Transform-limited Gaussian pump pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpectrum {
    /// nm
    pub center_wavelength: f64,
    /// Intensity FWHM in fs.
    pub pulse_duration_fwhm: f64,
}

impl Default for PumpSpectrum {
    fn default() -> Self {
        Self {
            center_wavelength: 390.0,
            pulse_duration_fwhm: 140.0,
        }
    }
}

impl PumpSpectrum {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_wavelength > 0.0) {
            return Err(Error::invalid("pump center wavelength must be positive"));
        }
        if !(self.pulse_duration_fwhm > 0.0) || !self.pulse_duration_fwhm.is_finite() {
            return Err(Error::invalid("pump pulse duration must be positive"));
        }
        Ok(())
    }

    /// Intensity FWHM of the pump spectrum in rad/fs, `2π·0.441/τ_p`.
    pub fn angular_bandwidth(&self) -> f64 {
        2.0 * PI * GAUSSIAN_TIME_BANDWIDTH / self.pulse_duration_fwhm
    }

    /// Spectral amplitude at sum-frequency detuning Ω_s + Ω_i.
    pub fn amplitude(&self, sum_detuning: f64) -> f64 {
        let bw = self.angular_bandwidth();
        (-2.0 * LN_2 * sum_detuning * sum_detuning / (bw * bw)).exp()
    }

    /// Degenerate signal/idler wavelength.
    pub fn degenerate_wavelength(&self) -> f64 {
        2.0 * self.center_wavelength
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMatchingModel {
    Sinc,
    GaussianApprox,
}

/// Type-II phase matching with a linearized wave-vector mismatch
/// Δk·L/2 = ½·L·(gvm_signal·Ω_s + gvm_idler·Ω_i).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMatching {
    /// mm
    pub crystal_length: f64,
    pub model: PhaseMatchingModel,
    /// Inverse group velocity mismatch pump/signal, fs/mm.
    pub gvm_signal: f64,
    /// Inverse group velocity mismatch pump/idler, fs/mm.
    pub gvm_idler: f64,
}

impl Default for PhaseMatching {
    /// 1 mm type-II BBO. The mismatch slopes are model parameters tuned so the
    /// heralded photons behind 10 nm filters reproduce the measured dip width
    /// and visibility; they are not Sellmeier-derived.
    fn default() -> Self {
        Self {
            crystal_length: 1.0,
            model: PhaseMatchingModel::Sinc,
            gvm_signal: 300.0,
            gvm_idler: 110.0,
        }
    }
}

impl PhaseMatching {
    pub fn validate(&self) -> Result<()> {
        if !(self.crystal_length > 0.0) || !self.crystal_length.is_finite() {
            return Err(Error::invalid("crystal length must be positive"));
        }
        if !self.gvm_signal.is_finite() || !self.gvm_idler.is_finite() {
            return Err(Error::invalid("group velocity mismatch must be finite"));
        }
        if self.gvm_signal == self.gvm_idler {
            return Err(Error::invalid(
                "type-II phase matching needs distinct signal and idler mismatch",
            ));
        }
        Ok(())
    }

    pub fn amplitude(&self, signal: f64, idler: f64) -> f64 {
        let x = 0.5 * self.crystal_length * (self.gvm_signal * signal + self.gvm_idler * idler);
        match self.model {
            PhaseMatchingModel::Sinc => sinc(x),
            PhaseMatchingModel::GaussianApprox => (-SINC_GAUSSIAN_GAMMA * x * x).exp(),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterShape {
    #[default]
    Gaussian,
    Flattop,
}

/// Bandpass filter specified by its intensity-transmission FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandpassFilter {
    /// nm
    pub center_wavelength: f64,
    /// nm
    pub fwhm: f64,
    pub shape: FilterShape,
}

impl BandpassFilter {
    pub fn gaussian(center_wavelength: f64, fwhm: f64) -> Self {
        Self {
            center_wavelength,
            fwhm,
            shape: FilterShape::Gaussian,
        }
    }

    pub fn flattop(center_wavelength: f64, fwhm: f64) -> Self {
        Self {
            center_wavelength,
            fwhm,
            shape: FilterShape::Flattop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_wavelength > 0.0) {
            return Err(Error::invalid("filter center wavelength must be positive"));
        }
        if !(self.fwhm > 0.0) || !self.fwhm.is_finite() {
            return Err(Error::invalid("filter FWHM must be positive"));
        }
        Ok(())
    }

    /// Amplitude transmission √T at detuning Ω from the carrier `carrier_wavelength`.
    pub fn amplitude_transmission(&self, detuning: f64, carrier_wavelength: f64) -> f64 {
        let offset = wavelength_to_detuning(self.center_wavelength, carrier_wavelength);
        // Validated filters always convert.
        let width = fwhm_wavelength_to_angular(self.fwhm, self.center_wavelength)
            .expect("validated filter");
        let x = detuning - offset;
        match self.shape {
            FilterShape::Gaussian => (-2.0 * LN_2 * x * x / (width * width)).exp(),
            FilterShape::Flattop => {
                if x.abs() <= 0.5 * width {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Joint spectral amplitude A(Ω_s, Ω_i), rows indexed by signal detuning and
/// columns by idler detuning, with Σ|A|²·Δω_s·Δω_i = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectralAmplitude {
    grid_signal: Arc<FrequencyGrid>,
    grid_idler: Arc<FrequencyGrid>,
    amplitudes: DMatrix<Complex64>,
}

impl JointSpectralAmplitude {
    /// Normalized JSA from an arbitrary amplitude function.
    pub fn from_fn(
        grid_signal: Arc<FrequencyGrid>,
        grid_idler: Arc<FrequencyGrid>,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let ws = grid_signal.detunings();
        let wi = grid_idler.detunings();
        let amplitudes = DMatrix::from_fn(ws.len(), wi.len(), |r, c| f(ws[r], wi[c]));
        Self::normalize(grid_signal, grid_idler, amplitudes)
    }

    /// Wraps an amplitude matrix and rescales it to unit L2 norm.
    pub fn from_matrix(
        grid_signal: Arc<FrequencyGrid>,
        grid_idler: Arc<FrequencyGrid>,
        amplitudes: DMatrix<Complex64>,
    ) -> Result<Self> {
        if amplitudes.nrows() != grid_signal.n_points() || amplitudes.ncols() != grid_idler.n_points() {
            return Err(Error::invalid(format!(
                "{}x{} amplitude matrix does not match {}x{} grids",
                amplitudes.nrows(),
                amplitudes.ncols(),
                grid_signal.n_points(),
                grid_idler.n_points()
            )));
        }
        Self::normalize(grid_signal, grid_idler, amplitudes)
    }

    fn normalize(
        grid_signal: Arc<FrequencyGrid>,
        grid_idler: Arc<FrequencyGrid>,
        mut amplitudes: DMatrix<Complex64>,
    ) -> Result<Self> {
        let cell = grid_signal.spacing() * grid_idler.spacing();
        let norm = (amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * cell).sqrt();
        if !(norm >= MIN_NORM) || !norm.is_finite() {
            return Err(Error::DegenerateFilter { norm });
        }
        amplitudes /= Complex64::new(norm, 0.0);
        Ok(Self {
            grid_signal,
            grid_idler,
            amplitudes,
        })
    }

    pub fn grid_signal(&self) -> &Arc<FrequencyGrid> {
        &self.grid_signal
    }

    pub fn grid_idler(&self) -> &Arc<FrequencyGrid> {
        &self.grid_idler
    }

    pub fn amplitudes(&self) -> &DMatrix<Complex64> {
        &self.amplitudes
    }

    /// Σ|A|²·Δω_s·Δω_i.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>()
            * self.grid_signal.spacing()
            * self.grid_idler.spacing()
    }

    /// Signal marginal intensity, Σ_i |A|²·Δω_i, one value per signal detuning.
    pub fn signal_marginal(&self) -> Vec<f64> {
        let di = self.grid_idler.spacing();
        self.amplitudes
            .row_iter()
            .map(|row| row.iter().map(|a| a.norm_sqr()).sum::<f64>() * di)
            .collect()
    }

    /// Idler marginal intensity, Σ_s |A|²·Δω_s, one value per idler detuning.
    pub fn idler_marginal(&self) -> Vec<f64> {
        let ds = self.grid_signal.spacing();
        self.amplitudes
            .column_iter()
            .map(|col| col.iter().map(|a| a.norm_sqr()).sum::<f64>() * ds)
            .collect()
    }
}

/// Builds A(Ω_s,Ω_i) = α(Ω_s+Ω_i)·Φ(Ω_s,Ω_i) on the given grids, which must be
/// centered on the degenerate wavelength (twice the pump wavelength).
pub fn build_jsa(
    pump: &PumpSpectrum,
    pm: &PhaseMatching,
    grid_s: &Arc<FrequencyGrid>,
    grid_i: &Arc<FrequencyGrid>,
) -> Result<JointSpectralAmplitude> {
    pump.validate()?;
    pm.validate()?;
    let degenerate = pump.degenerate_wavelength();
    for (name, grid) in [("signal", grid_s), ("idler", grid_i)] {
        let center = grid.center_wavelength();
        if (center - degenerate).abs() > 1e-9 * degenerate {
            return Err(Error::invalid(format!(
                "{name} grid centered at {center} nm, expected the degenerate {degenerate} nm"
            )));
        }
    }
    JointSpectralAmplitude::from_fn(Arc::clone(grid_s), Arc::clone(grid_i), |s, i| {
        Complex64::new(pump.amplitude(s + i) * pm.amplitude(s, i), 0.0)
    })
}

/// Multiplies the JSA by √T_s(Ω_s)·√T_i(Ω_i) and renormalizes.
pub fn apply_filters(
    jsa: &JointSpectralAmplitude,
    filter_s: &BandpassFilter,
    filter_i: &BandpassFilter,
) -> Result<JointSpectralAmplitude> {
    filter_s.validate()?;
    filter_i.validate()?;
    let ts: Vec<f64> = jsa
        .grid_signal
        .detunings()
        .iter()
        .map(|&w| filter_s.amplitude_transmission(w, jsa.grid_signal.center_wavelength()))
        .collect();
    let ti: Vec<f64> = jsa
        .grid_idler
        .detunings()
        .iter()
        .map(|&w| filter_i.amplitude_transmission(w, jsa.grid_idler.center_wavelength()))
        .collect();
    let amplitudes = DMatrix::from_fn(ts.len(), ti.len(), |r, c| {
        jsa.amplitudes[(r, c)] * (ts[r] * ti[c])
    });
    JointSpectralAmplitude::normalize(
        Arc::clone(&jsa.grid_signal),
        Arc::clone(&jsa.grid_idler),
        amplitudes,
    )
}

/// Joint spectral intensity |A|².
pub fn jsi(jsa: &JointSpectralAmplitude) -> DMatrix<f64> {
    jsa.amplitudes.map(|a| a.norm_sqr())
}

/// CSV rendering of the JSI: two `#` header lines with the signal and idler
/// grid metadata, then one row per signal detuning.
pub fn jsi_csv(jsa: &JointSpectralAmplitude) -> String {
    let intensity = jsi(jsa);
    let mut out = String::new();
    for (name, grid) in [("signal", &jsa.grid_signal), ("idler", &jsa.grid_idler)] {
        let _ = writeln!(
            out,
            "# {name}: center_wavelength_nm={},n_points={},detuning_min_rad_per_fs={},spacing_rad_per_fs={}",
            grid.center_wavelength(),
            grid.n_points(),
            grid.detunings()[0],
            grid.spacing()
        );
    }
    for row in intensity.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Detuning grid used for both arms, centered on the degenerate wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// nm; the grid spans ±`span_factor` angular FWHMs of this bandwidth.
    pub reference_bandwidth_fwhm: f64,
    pub span_factor: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            reference_bandwidth_fwhm: 10.0,
            span_factor: DEFAULT_SPAN_FACTOR,
            n_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// Everything needed to build one SPDC source's JSA and Schmidt decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub pump: PumpSpectrum,
    pub phase_matching: PhaseMatching,
    pub grid: GridConfig,
    pub truncation: Truncation,
}

impl SourceConfig {
    pub fn make_grid(&self) -> Result<FrequencyGrid> {
        make_grid(
            self.pump.degenerate_wavelength(),
            self.grid.reference_bandwidth_fwhm,
            self.grid.span_factor,
            self.grid.n_points,
        )
    }

    /// Unfiltered JSA on a shared signal/idler grid.
    pub fn build(&self) -> Result<JointSpectralAmplitude> {
        let grid = Arc::new(self.make_grid()?);
        build_jsa(&self.pump, &self.phase_matching, &grid, &grid)
    }
}

/// Filters in front of the heralded (signal) and heralding (idler) detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub signal: BandpassFilter,
    pub idler: BandpassFilter,
}

impl FilterConfig {
    /// Gaussian filters of the given FWHMs (nm) centered at `center` nm.
    pub fn gaussian(center: f64, signal_fwhm: f64, idler_fwhm: f64) -> Self {
        Self {
            signal: BandpassFilter::gaussian(center, signal_fwhm),
            idler: BandpassFilter::gaussian(center, idler_fwhm),
        }
    }

    pub fn apply(&self, jsa: &JointSpectralAmplitude) -> Result<JointSpectralAmplitude> {
        apply_filters(jsa, &self.signal, &self.idler)
    }
}
