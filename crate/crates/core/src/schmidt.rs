//! Schmidt decomposition of a discretized joint spectral amplitude and the
//! heralded single-photon states it yields.
//!
//! The JSA matrix scaled by √(Δω_s·Δω_i) is decomposed as U·Σ·V†. Squared
//! singular values are the Schmidt eigenvalues λ_n, columns of U (rescaled
//! by 1/√Δω_s) are the signal modes φ_n and rows of V† (rescaled by 1/√Δω_i)
//! the idler modes ψ_n, so that A(Ω_s,Ω_i) = Σ √λ_n φ_n(Ω_s) ψ_n(Ω_i).
//!
//! Mode phases are fixed so that the largest-magnitude sample of each φ_n is
//! real and positive; ψ_n carries the compensating phase. Eigenvalues that
//! agree within [`DEGENERACY_TOLERANCE`] are ordered by the first moment of
//! |φ_n|², ascending.

use std::fmt::Write as _;
use std::sync::Arc;

use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::source::JointSpectralAmplitude;
use crate::spectral::{FrequencyGrid, SpectralFunction};
use crate::{Error, Result};

pub const DEFAULT_CUMULATIVE_MASS: f64 = 0.999;

/// Discarded eigenvalue mass above which a decomposition is flagged.
pub const TRUNCATION_WARNING_MASS: f64 = 0.05;

pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// How many Schmidt modes to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// Keep the `r` largest modes.
    Rank(usize),
    /// Keep every mode with λ_n ≥ ε (at least one).
    EigenvalueThreshold(f64),
    /// Keep modes until their cumulative eigenvalue reaches the given mass.
    CumulativeMass(f64),
    /// Keep every singular vector.
    Full,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::CumulativeMass(DEFAULT_CUMULATIVE_MASS)
    }
}

impl Truncation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Truncation::Rank(0) => Err(Error::invalid("truncation rank must be at least 1")),
            Truncation::EigenvalueThreshold(eps) if !(0.0..1.0).contains(&eps) => Err(
                Error::invalid(format!("eigenvalue threshold must lie in [0, 1), got {eps}")),
            ),
            Truncation::CumulativeMass(m) if !(m > 0.0 && m <= 1.0) => Err(Error::invalid(
                format!("cumulative mass must lie in (0, 1], got {m}"),
            )),
            _ => Ok(()),
        }
    }

    /// Number of leading eigenvalues (sorted descending, summing to one) to keep.
    fn rank(&self, eigenvalues: &[f64]) -> usize {
        let n = eigenvalues.len();
        match *self {
            Truncation::Rank(r) => r.min(n),
            Truncation::EigenvalueThreshold(eps) => {
                eigenvalues.iter().take_while(|&&l| l >= eps).count().max(1)
            }
            Truncation::CumulativeMass(mass) => {
                let mut cumulative = 0.0;
                for (k, l) in eigenvalues.iter().enumerate() {
                    cumulative += l;
                    if cumulative >= mass {
                        return k + 1;
                    }
                }
                n
            }
            Truncation::Full => n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    eigenvalues: Vec<f64>,
    signal_modes: Vec<SpectralFunction>,
    idler_modes: Vec<SpectralFunction>,
    discarded_mass: f64,
}

impl SchmidtDecomposition {
    /// Renormalized eigenvalues of the kept modes, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn signal_modes(&self) -> &[SpectralFunction] {
        &self.signal_modes
    }

    pub fn idler_modes(&self) -> &[SpectralFunction] {
        &self.idler_modes
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalue mass removed by truncation, before renormalization.
    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    pub fn truncation_warning(&self) -> bool {
        self.discarded_mass > TRUNCATION_WARNING_MASS
    }

    pub fn signal_grid(&self) -> &Arc<FrequencyGrid> {
        self.signal_modes[0].grid()
    }

    /// Rank-r approximation of the decomposed JSA, using the eigenvalues as
    /// they were before renormalization.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let retained = 1.0 - self.discarded_mass;
        let ns = self.signal_modes[0].amplitudes().len();
        let ni = self.idler_modes[0].amplitudes().len();
        let mut out = DMatrix::zeros(ns, ni);
        for ((lambda, phi), psi) in self
            .eigenvalues
            .iter()
            .zip(&self.signal_modes)
            .zip(&self.idler_modes)
        {
            let weight = (lambda * retained).sqrt();
            for (r, p) in phi.amplitudes().iter().enumerate() {
                let scaled = p * weight;
                for (c, q) in psi.amplitudes().iter().enumerate() {
                    out[(r, c)] += scaled * q;
                }
            }
        }
        out
    }

    /// CSV with columns `index,lambda`.
    pub fn eigenvalues_csv(&self) -> String {
        let mut out = String::from("index,lambda\n");
        for (n, l) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{n},{l}");
        }
        out
    }
}

/// Decomposes a normalized JSA by SVD and keeps the modes chosen by `truncation`.
pub fn schmidt_decompose(
    jsa: &JointSpectralAmplitude,
    truncation: Truncation,
) -> Result<SchmidtDecomposition> {
    truncation.validate()?;
    let grid_s = jsa.grid_signal();
    let grid_i = jsa.grid_idler();
    let ds = grid_s.spacing();
    let di = grid_i.spacing();
    let scaled = jsa.amplitudes() * Complex64::new((ds * di).sqrt(), 0.0);
    let matrix = Mat::<Complex64>::from_fn(scaled.nrows(), scaled.ncols(), |r, c| scaled[(r, c)]);
    let svd = matrix
        .thin_svd()
        .map_err(|e| Error::DegenerateState(format!("singular value decomposition failed: {e:?}")))?;
    let u = svd.U();
    let v = svd.V();
    let singular: Vec<f64> = svd.S().column_vector().iter().map(|s| s.re).collect();

    let total: f64 = singular.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateState("JSA has zero norm".into()));
    }

    let phase_fixed = |n: usize| {
        let phi: Vec<Complex64> = u.col(n).iter().map(|a| a / ds.sqrt()).collect();
        let psi: Vec<Complex64> = v.col(n).iter().map(|a| a.conj() / di.sqrt()).collect();
        let peak = phi
            .iter()
            .copied()
            .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
            .unwrap_or_default();
        let phase = if peak.norm() > 0.0 {
            peak / peak.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let phi = SpectralFunction::new(
            Arc::clone(grid_s),
            phi.into_iter().map(|a| a * phase.conj()).collect(),
        )
        .expect("column length matches signal grid");
        let psi = SpectralFunction::new(
            Arc::clone(grid_i),
            psi.into_iter().map(|a| a * phase).collect(),
        )
        .expect("row length matches idler grid");
        (phi, psi)
    };

    let mut order: Vec<usize> = (0..singular.len()).collect();
    order.sort_by(|&a, &b| singular[b].total_cmp(&singular[a]));
    let all: Vec<f64> = order.iter().map(|&n| singular[n] * singular[n] / total).collect();
    let mut rank = truncation.rank(&all);

    // Extend the kept range to the end of any degenerate group it cuts through,
    // then order each group deterministically.
    while rank < all.len() && (all[rank - 1] - all[rank]).abs() <= DEGENERACY_TOLERANCE {
        rank += 1;
    }
    let mut modes: Vec<(f64, SpectralFunction, SpectralFunction)> = order[..rank]
        .iter()
        .zip(&all)
        .map(|(&n, &l)| {
            let (phi, psi) = phase_fixed(n);
            (l, phi, psi)
        })
        .collect();
    let mut start = 0;
    while start < modes.len() {
        let mut end = start + 1;
        while end < modes.len() && (modes[end - 1].0 - modes[end].0).abs() <= DEGENERACY_TOLERANCE {
            end += 1;
        }
        if end - start > 1 {
            modes[start..end].sort_by(|a, b| a.1.first_moment().total_cmp(&b.1.first_moment()));
        }
        start = end;
    }
    let rank = truncation.rank(&all);
    modes.truncate(rank);

    let kept: f64 = modes.iter().map(|m| m.0).sum();
    let discarded_mass = (1.0 - kept).max(0.0);
    let (mut eigenvalues, mut signal_modes, mut idler_modes) =
        (Vec::with_capacity(rank), Vec::with_capacity(rank), Vec::with_capacity(rank));
    for (l, phi, psi) in modes {
        eigenvalues.push(l / kept);
        signal_modes.push(phi);
        idler_modes.push(psi);
    }
    Ok(SchmidtDecomposition {
        eigenvalues,
        signal_modes,
        idler_modes,
        discarded_mass,
    })
}

/// Mixed heralded single-photon state ρ = Σ_n w_n |φ_n⟩⟨φ_n|.
#[derive(Debug, Clone)]
pub struct HeraldedState {
    weights: Vec<f64>,
    modes: Vec<SpectralFunction>,
    accumulated_dispersion: f64,
}

impl HeraldedState {
    /// Validates weights (non-negative, summing to one within 1e-10) and that
    /// all modes share one grid.
    pub fn new(
        weights: Vec<f64>,
        modes: Vec<SpectralFunction>,
        accumulated_dispersion: f64,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != modes.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} modes",
                weights.len(),
                modes.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("state weights must be non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("state weights sum to {sum}, not 1")));
        }
        if modes.iter().any(|m| !m.grid().is_compatible(modes[0].grid())) {
            return Err(Error::IncompatibleGrid);
        }
        if !accumulated_dispersion.is_finite() {
            return Err(Error::invalid("accumulated dispersion must be finite"));
        }
        Ok(Self {
            weights,
            modes,
            accumulated_dispersion,
        })
    }

    /// Pure state with the given mode, normalized to unit norm.
    pub fn pure(mode: &SpectralFunction) -> Result<Self> {
        Ok(Self {
            weights: vec![1.0],
            modes: vec![mode.normalized()?],
            accumulated_dispersion: 0.0,
        })
    }

    pub(crate) fn with_modes(&self, modes: Vec<SpectralFunction>, accumulated_dispersion: f64) -> Self {
        Self {
            weights: self.weights.clone(),
            modes,
            accumulated_dispersion,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn modes(&self) -> &[SpectralFunction] {
        &self.modes
    }

    /// Total βL (fs²) already applied to the modes.
    pub fn accumulated_dispersion(&self) -> f64 {
        self.accumulated_dispersion
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        self.modes[0].grid()
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }
}

/// Traces out the idler: weights are the Schmidt eigenvalues, modes the
/// signal Schmidt modes.
pub fn herald(decomp: &SchmidtDecomposition) -> HeraldedState {
    HeraldedState {
        weights: decomp.eigenvalues.clone(),
        modes: decomp.signal_modes.clone(),
        accumulated_dispersion: 0.0,
    }
}

/// Tr ρ² = Σ w_n².
pub fn purity(state: &HeraldedState) -> f64 {
    state.weights.iter().map(|w| w * w).sum()
}

/// K = 1 / Σ λ_n².
pub fn schmidt_number(decomp: &SchmidtDecomposition) -> f64 {
    1.0 / decomp.eigenvalues.iter().map(|l| l * l).sum::<f64>()
}

/// Pure state whose single mode is Σ_n λ_n φ_n, renormalized.
pub fn postulate_pure_state(decomp: &SchmidtDecomposition) -> Result<HeraldedState> {
    let grid = decomp.signal_grid();
    let mut sum = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    for (l, phi) in decomp.eigenvalues.iter().zip(&decomp.signal_modes) {
        for (acc, a) in sum.iter_mut().zip(phi.amplitudes()) {
            *acc += a * *l;
        }
    }
    let mode = SpectralFunction::new(Arc::clone(grid), sum)?;
    let norm = mode.norm();
    if !(norm > 1e-12) {
        return Err(Error::DegenerateState(format!(
            "eigenvalue-weighted mode sum has norm {norm:e}"
        )));
    }
    Ok(HeraldedState {
        weights: vec![1.0],
        modes: vec![mode.scaled(Complex64::new(1.0 / norm, 0.0))],
        accumulated_dispersion: 0.0,
    })
}
