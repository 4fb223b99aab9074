//! Hong-Ou-Mandel interference of two independent heralded photons.
//!
//! For mixed inputs ρ_j = Σ_n λ_n^j |φ_n^j⟩⟨φ_n^j| on a lossless 50/50 beam
//! splitter with frequency-integrating detectors, the coincidence probability
//! is
//!
//! ```text
//! P(τ) = ½ − ½ Σ_{nn'} λ_n¹ λ_{n'}² |O_{nn'}(τ)|²
//! O_{nn'}(τ) = ∫ dΩ conj(φ_n¹(Ω)) φ_{n'}²(Ω) e^{½iΔβL·Ω²} e^{iΩτ}
//! ```
//!
//! with ΔβL = β₁L₁ − β₂L₂ and τ the delay of photon 2 relative to photon 1.
//! Only the dispersion difference enters, which is the cancellation effect.

mod fit;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::dispersion::apply_beta_l;
use crate::schmidt::{herald, postulate_pure_state, schmidt_decompose, HeraldedState, SchmidtDecomposition};
use crate::source::{FilterConfig, JointSpectralAmplitude, SourceConfig};
use crate::{Error, Result};

pub use fit::{fit_dip, DipMetrics};

/// Uniform grid of relative delays in fs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_steps: usize,
}

impl ScanConfig {
    pub fn new(tau_min: f64, tau_max: f64, n_steps: usize) -> Result<Self> {
        let cfg = Self {
            tau_min,
            tau_max,
            n_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min < self.tau_max) || !self.tau_min.is_finite() || !self.tau_max.is_finite() {
            return Err(Error::invalid(format!(
                "scan range [{}, {}] fs is empty",
                self.tau_min, self.tau_max
            )));
        }
        if self.n_steps < 3 {
            return Err(Error::invalid(format!(
                "scan needs at least 3 steps, got {}",
                self.n_steps
            )));
        }
        Ok(())
    }

    /// ±3 ps in 241 steps, for matched dispersion.
    pub fn matched() -> Self {
        Self {
            tau_min: -3000.0,
            tau_max: 3000.0,
            n_steps: 241,
        }
    }

    /// ±6 ps in 241 steps, for dips broadened by a dispersion mismatch.
    pub fn dispersed() -> Self {
        Self {
            tau_min: -6000.0,
            tau_max: 6000.0,
            n_steps: 241,
        }
    }

    pub fn for_delta(delta_beta_l: f64) -> Self {
        if delta_beta_l == 0.0 {
            Self::matched()
        } else {
            Self::dispersed()
        }
    }

    /// Delay samples; symmetric ranges give exactly mirrored samples.
    pub fn taus(&self) -> Vec<f64> {
        let center = 0.5 * (self.tau_min + self.tau_max);
        let half_step = 0.5 * (self.tau_max - self.tau_min) / (self.n_steps - 1) as f64;
        let last = (self.n_steps - 1) as i64;
        (0..self.n_steps as i64)
            .map(|k| center + (2 * k - last) as f64 * half_step)
            .collect()
    }
}

/// Sampled P(τ).
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceScan {
    taus: Vec<f64>,
    probabilities: Vec<f64>,
}

impl InterferenceScan {
    pub fn new(taus: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if taus.len() != probabilities.len() {
            return Err(Error::invalid(format!(
                "{} delays for {} probabilities",
                taus.len(),
                probabilities.len()
            )));
        }
        if let Some(p) = probabilities
            .iter()
            .find(|p| !(**p >= -1e-9 && **p <= 0.5 + 1e-9))
        {
            return Err(Error::invalid(format!("coincidence probability {p} out of range")));
        }
        if taus.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("scan delays must be strictly increasing"));
        }
        Ok(Self {
            taus,
            probabilities,
        })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// CSV with columns `tau_fs,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_fs,probability\n");
        for (t, p) in self.taus.iter().zip(&self.probabilities) {
            let _ = writeln!(out, "{t},{p}");
        }
        out
    }
}

/// Mode-pair integrands conj(φ_n¹)·φ_{n'}²·e^{½iΔβL·Ω²}·ΔΩ, weighted by λ_n¹λ_{n'}².
struct OverlapKernel {
    detunings: Vec<f64>,
    pairs: Vec<(f64, Vec<Complex64>)>,
}

/// ΔβL still to be applied on top of the modes: the explicit value for pristine
/// states, zero when the modes already carry their dispersion phases.
fn residual_dispersion(
    state1: &HeraldedState,
    state2: &HeraldedState,
    delta_beta_l: Option<f64>,
) -> Result<f64> {
    if !state1.grid().is_compatible(state2.grid()) {
        return Err(Error::IncompatibleGrid);
    }
    match delta_beta_l {
        Some(delta) => {
            if state1.accumulated_dispersion() != 0.0 || state2.accumulated_dispersion() != 0.0 {
                return Err(Error::invalid(
                    "dispersion given both explicitly and through the states",
                ));
            }
            if !delta.is_finite() {
                return Err(Error::invalid("dispersion difference must be finite"));
            }
            Ok(delta)
        }
        None => Ok(0.0),
    }
}

impl OverlapKernel {
    fn new(state1: &HeraldedState, state2: &HeraldedState, delta_beta_l: Option<f64>) -> Result<Self> {
        let extra = residual_dispersion(state1, state2, delta_beta_l)?;
        let grid = state1.grid();
        let spacing = grid.spacing();
        let chirp: Vec<Complex64> = grid
            .detunings()
            .iter()
            .map(|&w| Complex64::from_polar(spacing, 0.5 * extra * w * w))
            .collect();
        let mut pairs = Vec::with_capacity(state1.rank() * state2.rank());
        for (l1, m1) in state1.weights().iter().zip(state1.modes()) {
            for (l2, m2) in state2.weights().iter().zip(state2.modes()) {
                let integrand = m1
                    .amplitudes()
                    .iter()
                    .zip(m2.amplitudes())
                    .zip(&chirp)
                    .map(|((a, b), c)| a.conj() * b * c)
                    .collect();
                pairs.push((l1 * l2, integrand));
            }
        }
        Ok(Self {
            detunings: grid.detunings().to_vec(),
            pairs,
        })
    }

    fn probability(&self, tau: f64) -> f64 {
        let delay: Vec<Complex64> = self
            .detunings
            .iter()
            .map(|&w| Complex64::from_polar(1.0, w * tau))
            .collect();
        let visibility_term: f64 = self
            .pairs
            .iter()
            .map(|(weight, integrand)| {
                let overlap: Complex64 = integrand.iter().zip(&delay).map(|(g, d)| g * d).sum();
                weight * overlap.norm_sqr()
            })
            .sum();
        0.5 - 0.5 * visibility_term
    }
}

/// Coincidence probability at delay `tau` (fs).
///
/// The dispersion difference ΔβL = β₁L₁ − β₂L₂ comes from exactly one place:
/// either `delta_beta_l` for pristine states, or (`None`) the phases already
/// applied to the states by [`crate::dispersion::apply_dispersion`]. Passing
/// both is an error.
pub fn coincidence_probability(
    state1: &HeraldedState,
    state2: &HeraldedState,
    delta_beta_l: Option<f64>,
    tau: f64,
) -> Result<f64> {
    Ok(OverlapKernel::new(state1, state2, delta_beta_l)?.probability(tau))
}

/// Brute-force evaluation of the same probability from the full density
/// matrices ρ_j(Ω,Ω') on the grid, by direct double quadrature.
pub fn coincidence_probability_oracle(
    state1: &HeraldedState,
    state2: &HeraldedState,
    delta_beta_l: Option<f64>,
    tau: f64,
) -> Result<f64> {
    let extra = residual_dispersion(state1, state2, delta_beta_l)?;
    let grid = state1.grid();
    let n = grid.n_points();
    let density = |state: &HeraldedState| {
        let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
        for (w, m) in state.weights().iter().zip(state.modes()) {
            let a = m.amplitudes();
            for k in 0..n {
                for l in 0..n {
                    rho[k * n + l] += a[k] * a[l].conj() * *w;
                }
            }
        }
        rho
    };
    let rho1 = density(state1);
    let rho2 = density(state2);
    let phase: Vec<Complex64> = grid
        .detunings()
        .iter()
        .map(|&w| Complex64::from_polar(1.0, 0.5 * extra * w * w + w * tau))
        .collect();
    let mut trace = Complex64::new(0.0, 0.0);
    for k in 0..n {
        for l in 0..n {
            trace += rho1[l * n + k] * rho2[k * n + l] * phase[k] * phase[l].conj();
        }
    }
    let spacing = grid.spacing();
    Ok(0.5 - 0.5 * trace.re * spacing * spacing)
}

/// P(τ) over the delays of `cfg`, evaluated in parallel; each sample is
/// computed independently so the result matches a sequential evaluation bit
/// for bit.
pub fn scan(
    state1: &HeraldedState,
    state2: &HeraldedState,
    delta_beta_l: Option<f64>,
    cfg: &ScanConfig,
) -> Result<InterferenceScan> {
    cfg.validate()?;
    let kernel = OverlapKernel::new(state1, state2, delta_beta_l)?;
    let taus = cfg.taus();
    let probabilities = taus.par_iter().map(|&t| kernel.probability(t)).collect();
    InterferenceScan::new(taus, probabilities)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PurityMode {
    /// Heralded photons as the mixed states left by tracing out the idler.
    #[default]
    Mixed,
    /// A pure photon built from the eigenvalue-weighted sum of Schmidt modes.
    PostulatedPure,
}

/// Filtered JSA, its decomposition and the resulting heralded photon.
#[derive(Debug, Clone)]
pub struct PreparedSource {
    pub jsa: JointSpectralAmplitude,
    pub decomposition: SchmidtDecomposition,
    pub state: HeraldedState,
}

/// build → filter → decompose → herald (or postulate a pure state).
pub fn prepare_source(
    source: &SourceConfig,
    filters: &FilterConfig,
    purity_mode: PurityMode,
) -> Result<PreparedSource> {
    let jsa = filters.apply(&source.build()?)?;
    let decomposition = schmidt_decompose(&jsa, source.truncation)?;
    let state = match purity_mode {
        PurityMode::Mixed => herald(&decomposition),
        PurityMode::PostulatedPure => postulate_pure_state(&decomposition)?,
    };
    Ok(PreparedSource {
        jsa,
        decomposition,
        state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityPoint {
    pub delta_l_mm: f64,
    pub visibility: f64,
    pub fwhm_ps: f64,
}

/// Dip visibility and width versus fiber length difference ΔL = L₁ − L₂ for
/// two identical sources, fiber 1 of length `l1` (mm) and group velocity
/// dispersion `beta` (fs²/mm) in both arms.
pub fn visibility_curve(
    source: &SourceConfig,
    filters: &FilterConfig,
    beta: f64,
    l1: f64,
    delta_l_list: &[f64],
    purity_mode: PurityMode,
) -> Result<Vec<VisibilityPoint>> {
    if !(l1 >= 0.0) {
        return Err(Error::invalid(format!("fiber length L1 = {l1} mm is negative")));
    }
    let prepared = prepare_source(source, filters, purity_mode)?;
    let arm1 = apply_beta_l(&prepared.state, beta * l1);
    delta_l_list
        .iter()
        .map(|&delta_l| {
            let l2 = l1 - delta_l;
            if !(l2 >= 0.0) {
                return Err(Error::invalid(format!(
                    "length difference {delta_l} mm exceeds L1 = {l1} mm"
                )));
            }
            let arm2 = apply_beta_l(&prepared.state, beta * l2);
            let cfg = ScanConfig::for_delta(beta * delta_l);
            let metrics = fit_dip(&scan(&arm1, &arm2, None, &cfg)?)?;
            Ok(VisibilityPoint {
                delta_l_mm: delta_l,
                visibility: metrics.visibility,
                fwhm_ps: metrics.fwhm,
            })
        })
        .collect()
}

/// CSV with columns `delta_l_mm,visibility,fwhm_ps`.
pub fn visibility_curve_csv(points: &[VisibilityPoint]) -> String {
    let mut out = String::from("delta_l_mm,visibility,fwhm_ps\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.delta_l_mm, p.visibility, p.fwhm_ps);
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dispersion::apply_beta_l;
    use crate::schmidt::purity;
    use crate::spectral::{make_grid, FrequencyGrid, SpectralFunction};

    fn grid(n: usize) -> Arc<FrequencyGrid> {
        Arc::new(make_grid(780.0, 10.0, 4.0, n).unwrap())
    }

    fn gaussian(grid: &Arc<FrequencyGrid>, center: f64, sigma: f64) -> SpectralFunction {
        SpectralFunction::from_fn(Arc::clone(grid), |w| {
            let x = (w - center) / sigma;
            Complex64::new((-0.5 * x * x).exp(), 0.0)
        })
        .normalized()
        .unwrap()
    }

    fn mixed(grid: &Arc<FrequencyGrid>) -> HeraldedState {
        let a = gaussian(grid, 0.0, 0.006);
        let b = a.map_with_detuning(|w| Complex64::new(w, 0.0)).normalized().unwrap();
        let c = a
            .map_with_detuning(|w| Complex64::new(w * w / 0.006f64.powi(2) - 0.5, 0.0))
            .normalized()
            .unwrap();
        HeraldedState::new(vec![0.6, 0.3, 0.1], vec![a, b, c], 0.0).unwrap()
    }

    #[test]
    fn identical_pure_states_coalesce() {
        let g = grid(256);
        let s = HeraldedState::pure(&gaussian(&g, 0.0, 0.006)).unwrap();
        let p = coincidence_probability(&s, &s, Some(0.0), 0.0).unwrap();
        assert!(p.abs() < 1e-12);
        let far = coincidence_probability(&s, &s, Some(0.0), 5000.0).unwrap();
        assert!((far - 0.5).abs() < 1e-6);
    }

    #[test]
    fn mixed_visibility_equals_purity() {
        let g = grid(256);
        let s = mixed(&g);
        let p = coincidence_probability(&s, &s, Some(0.0), 0.0).unwrap();
        assert!((p - 0.5 * (1.0 - purity(&s))).abs() < 1e-12);
        let o = coincidence_probability_oracle(&s, &s, Some(0.0), 0.0).unwrap();
        assert!((p - o).abs() < 1e-12);
    }

    #[test]
    fn oracle_limits() {
        let g = grid(64);
        let s = HeraldedState::pure(&gaussian(&g, 0.0, 0.01)).unwrap();
        assert!(coincidence_probability_oracle(&s, &s, Some(0.0), 0.0).unwrap().abs() < 1e-12);
        let left = SpectralFunction::from_fn(Arc::clone(&g), |w| {
            Complex64::new(if w < 0.0 { 1.0 } else { 0.0 }, 0.0)
        });
        let right = SpectralFunction::from_fn(Arc::clone(&g), |w| {
            Complex64::new(if w > 0.0 { 1.0 } else { 0.0 }, 0.0)
        });
        let l = HeraldedState::pure(&left).unwrap();
        let r = HeraldedState::pure(&right).unwrap();
        for tau in [-300.0, 0.0, 120.0] {
            let p = coincidence_probability_oracle(&l, &r, Some(1e4), tau).unwrap();
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn explicit_and_accumulated_dispersion_agree() {
        let g = grid(256);
        let s = mixed(&g);
        let (b1, b2) = (226812.0, 132307.0);
        let d1 = apply_beta_l(&s, b1);
        let d2 = apply_beta_l(&s, b2);
        for tau in [-800.0, 0.0, 350.0] {
            let explicit = coincidence_probability(&s, &s, Some(b1 - b2), tau).unwrap();
            let carried = coincidence_probability(&d1, &d2, None, tau).unwrap();
            assert!((explicit - carried).abs() < 1e-10);
        }
    }

    #[test]
    fn double_specified_dispersion_rejected() {
        let g = grid(64);
        let s = mixed(&g);
        let d = apply_beta_l(&s, 1000.0);
        assert!(matches!(
            coincidence_probability(&d, &s, Some(1000.0), 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = HeraldedState::pure(&gaussian(&grid(64), 0.0, 0.01)).unwrap();
        let b = HeraldedState::pure(&gaussian(&grid(128), 0.0, 0.01)).unwrap();
        assert!(matches!(
            coincidence_probability(&a, &b, Some(0.0), 0.0),
            Err(Error::IncompatibleGrid)
        ));
    }

    #[test]
    fn scan_matches_pointwise_evaluation() {
        let g = grid(128);
        let s = mixed(&g);
        let cfg = ScanConfig::new(-1000.0, 1000.0, 41).unwrap();
        let sc = scan(&s, &s, Some(5e4), &cfg).unwrap();
        for (t, p) in sc.taus().iter().zip(sc.probabilities()) {
            let q = coincidence_probability(&s, &s, Some(5e4), *t).unwrap();
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }

    #[test]
    fn symmetric_scan_for_even_states() {
        let g = grid(256);
        let s = HeraldedState::pure(&gaussian(&g, 0.0, 0.0131)).unwrap();
        let sc = scan(&s, &s, Some(0.0), &ScanConfig::matched()).unwrap();
        let p = sc.probabilities();
        let n = p.len();
        for k in 0..n {
            assert_eq!(sc.taus()[k], -sc.taus()[n - 1 - k]);
            assert!((p[k] - p[n - 1 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn scan_config_validation() {
        assert!(ScanConfig::new(1.0, -1.0, 10).is_err());
        assert!(ScanConfig::new(-1.0, 1.0, 2).is_err());
        let taus = ScanConfig::new(-10.0, 10.0, 5).unwrap().taus();
        assert_eq!(taus, vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
    }

    #[test]
    fn scan_csv_layout() {
        let sc = InterferenceScan::new(vec![-1.0, 0.0, 1.0], vec![0.5, 0.25, 0.5]).unwrap();
        assert_eq!(sc.to_csv(), "tau_fs,probability\n-1,0.5\n0,0.25\n1,0.5\n");
        assert!(InterferenceScan::new(vec![0.0], vec![0.7]).is_err());
    }
}
