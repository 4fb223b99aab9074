#![allow(dead_code)]

use std::sync::Arc;

use dispcancel::schmidt::HeraldedState;
use dispcancel::spectral::{inner_product, make_grid, FrequencyGrid, SpectralFunction};
use dispcancel::Complex64;
use rand::Rng;

pub fn grid(n: usize, reference_nm: f64) -> Arc<FrequencyGrid> {
    Arc::new(make_grid(780.0, reference_nm, 4.0, n).unwrap())
}

pub fn gaussian(grid: &Arc<FrequencyGrid>, center: f64, sigma: f64) -> SpectralFunction {
    SpectralFunction::from_fn(Arc::clone(grid), |w| {
        let x = (w - center) / sigma;
        Complex64::new((-0.5 * x * x).exp(), 0.0)
    })
    .normalized()
    .unwrap()
}

/// Smooth random complex function: a few Gaussian bumps with random complex
/// weights and a random linear phase.
pub fn random_mode<R: Rng>(rng: &mut R, grid: &Arc<FrequencyGrid>) -> SpectralFunction {
    let half = grid.half_span();
    let bumps: Vec<(f64, f64, Complex64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-0.4..0.4) * half,
                rng.gen_range(0.08..0.25) * half,
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    let slope = rng.gen_range(-200.0..200.0);
    SpectralFunction::from_fn(Arc::clone(grid), |w| {
        let envelope: Complex64 = bumps
            .iter()
            .map(|(c, s, a)| a * (-0.5 * ((w - c) / s).powi(2)).exp())
            .sum();
        envelope * Complex64::from_polar(1.0, slope * w)
    })
}

/// Gram-Schmidt orthonormalization; the input must be linearly independent.
pub fn orthonormalize(modes: Vec<SpectralFunction>) -> Vec<SpectralFunction> {
    let mut out: Vec<SpectralFunction> = Vec::with_capacity(modes.len());
    for m in modes {
        let mut amps = m.amplitudes().to_vec();
        for q in &out {
            let c = inner_product(q, &m).unwrap();
            for (a, b) in amps.iter_mut().zip(q.amplitudes()) {
                *a -= c * b;
            }
        }
        out.push(SpectralFunction::new(m.grid().clone(), amps).unwrap().normalized().unwrap());
    }
    out
}

pub fn random_state<R: Rng>(rng: &mut R, grid: &Arc<FrequencyGrid>, max_rank: usize) -> HeraldedState {
    let rank = rng.gen_range(1..=max_rank);
    let modes = orthonormalize((0..rank).map(|_| random_mode(rng, grid)).collect());
    let raw: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let rest: f64 = weights[1..].iter().sum();
    weights[0] = 1.0 - rest;
    HeraldedState::new(weights, modes, 0.0).unwrap()
}
