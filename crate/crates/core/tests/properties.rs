mod common;

use std::f64::consts::LN_2;
use std::sync::Arc;

use dispcancel::dispersion::{apply_beta_l, DispersiveElement};
use dispcancel::hom::{coincidence_probability, fit_dip, InterferenceScan, ScanConfig};
use dispcancel::network::{check_cancellation, NetworkSpec};
use dispcancel::schmidt::{schmidt_decompose, Truncation};
use dispcancel::source::JointSpectralAmplitude;
use dispcancel::spectral::{inner_product, SpectralFunction};
use dispcancel::Complex64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn combine(a: Complex64, f: &SpectralFunction, g: &SpectralFunction) -> SpectralFunction {
    let amps = f
        .amplitudes()
        .iter()
        .zip(g.amplitudes())
        .map(|(x, y)| a * x + y)
        .collect();
    SpectralFunction::new(f.grid().clone(), amps).unwrap()
}

fn random_jsa(r: &mut ChaCha8Rng, n: usize) -> JointSpectralAmplitude {
    let g = common::grid(n, 10.0);
    let m = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
    });
    JointSpectralAmplitude::from_matrix(Arc::clone(&g), g, m).unwrap()
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn element(beta_l: f64) -> DispersiveElement {
    DispersiveElement::new(beta_l, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inner_product_is_sesquilinear(seed in any::<u64>(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let mut r = rng(seed);
        let g = common::grid(64, 10.0);
        let (f, u, v) = (
            common::random_mode(&mut r, &g),
            common::random_mode(&mut r, &g),
            common::random_mode(&mut r, &g),
        );
        let a = Complex64::new(re, im);
        let lhs = inner_product(&f, &combine(a, &u, &v)).unwrap();
        let rhs = a * inner_product(&f, &u).unwrap() + inner_product(&f, &v).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        let swapped = inner_product(&u, &f).unwrap().conj();
        prop_assert!((inner_product(&f, &u).unwrap() - swapped).norm() < 1e-12);
        let first = inner_product(&f.scaled(a), &u).unwrap();
        prop_assert!((first - a.conj() * inner_product(&f, &u).unwrap()).norm() < 1e-10 * (1.0 + first.norm()));
    }

    #[test]
    fn dispersion_is_unitary_and_reversible(seed in any::<u64>(), beta_l in -4e5..4e5f64) {
        let mut r = rng(seed);
        let g = common::grid(64, 10.0);
        let state = common::random_state(&mut r, &g, 4);
        let out = apply_beta_l(&state, beta_l);
        for m in out.modes() {
            prop_assert!((m.norm() - 1.0).abs() < 1e-12);
        }
        prop_assert!((out.accumulated_dispersion() - beta_l).abs() < 1e-9);
        let back = apply_beta_l(&out, -beta_l);
        for (a, b) in back.modes().iter().zip(state.modes()) {
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn coincidence_probability_is_bounded(seed in any::<u64>(), delta in -4e5..4e5f64, tau in -2000.0..2000.0f64) {
        let mut r = rng(seed);
        let g = common::grid(48, 10.0);
        let s1 = common::random_state(&mut r, &g, 4);
        let s2 = common::random_state(&mut r, &g, 4);
        let p = coincidence_probability(&s1, &s2, Some(delta), tau).unwrap();
        prop_assert!((-1e-12..=0.5 + 1e-9).contains(&p), "P = {}", p);
    }

    #[test]
    fn exchange_symmetry(seed in any::<u64>(), delta in -4e5..4e5f64, tau in -2000.0..2000.0f64) {
        let mut r = rng(seed);
        let g = common::grid(48, 10.0);
        let s1 = common::random_state(&mut r, &g, 3);
        let s2 = common::random_state(&mut r, &g, 3);
        let p = coincidence_probability(&s1, &s2, Some(delta), tau).unwrap();
        let q = coincidence_probability(&s2, &s1, Some(-delta), -tau).unwrap();
        prop_assert!((p - q).abs() < 1e-12);
    }

    #[test]
    fn common_dispersion_cancels(seed in any::<u64>(), shift in -4e5..4e5f64, delta in -2e5..2e5f64, tau in -1500.0..1500.0f64) {
        let mut r = rng(seed);
        let g = common::grid(64, 10.0);
        let s1 = common::random_state(&mut r, &g, 3);
        let s2 = common::random_state(&mut r, &g, 3);
        let reference = coincidence_probability(&apply_beta_l(&s1, delta), &s2, None, tau).unwrap();
        let shifted = coincidence_probability(
            &apply_beta_l(&s1, delta + shift),
            &apply_beta_l(&s2, shift),
            None,
            tau,
        )
        .unwrap();
        prop_assert!((reference - shifted).abs() < 1e-9);
        let explicit = coincidence_probability(&s1, &s2, Some(delta), tau).unwrap();
        prop_assert!((reference - explicit).abs() < 1e-9);
    }

    #[test]
    fn full_svd_reconstructs_and_is_orthonormal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let jsa = random_jsa(&mut r, 16);
        let d = schmidt_decompose(&jsa, Truncation::Full).unwrap();
        let err = max_abs(&(d.reconstruct() - jsa.amplitudes())) / max_abs(jsa.amplitudes());
        prop_assert!(err < 1e-10, "relative reconstruction error {}", err);
        for modes in [d.signal_modes(), d.idler_modes()] {
            for (a, f) in modes.iter().enumerate() {
                for (b, h) in modes.iter().enumerate() {
                    let expected = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((inner_product(f, h).unwrap() - expected).norm() < 1e-10);
                }
            }
        }
        let total: f64 = d.eigenvalues().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(d.eigenvalues().windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn truncation_error_equals_discarded_mass(seed in any::<u64>(), rank in 1usize..12) {
        let mut r = rng(seed);
        let jsa = random_jsa(&mut r, 16);
        let d = schmidt_decompose(&jsa, Truncation::Rank(rank)).unwrap();
        let cell = jsa.grid_signal().spacing() * jsa.grid_idler().spacing();
        let diff = d.reconstruct() - jsa.amplitudes();
        let err_sqr: f64 = diff.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell;
        prop_assert!((err_sqr - d.discarded_mass()).abs() < 1e-10);
    }

    #[test]
    fn cancellation_verdict_survives_rescaling(
        seed in any::<u64>(),
        kind in 0usize..3,
        k in 0.1..10.0f64,
    ) {
        let mut r = rng(seed);
        let x = r.gen_range(1e3..3e5);
        let y = r.gen_range(1e3..3e5);
        let betas = match kind {
            0 => [x, x, x, 0.0],
            1 => [x, x, x + y, y],
            _ => [x, r.gen_range(0.0..3e5), r.gen_range(0.0..3e5), y],
        };
        let build = |s: f64| {
            NetworkSpec::cascaded_three_photon(
                element(s * betas[0]),
                element(s * betas[1]),
                element(s * betas[2]),
                element(s * betas[3]),
            )
        };
        let base = check_cancellation(&build(1.0), 1e-6).unwrap();
        let scaled = check_cancellation(&build(k), 1e-6).unwrap();
        prop_assert_eq!(base.satisfied, scaled.satisfied);
        prop_assert_eq!(base.satisfied, kind < 2);
    }

    #[test]
    fn dip_fit_recovers_parameters(
        b in 0.2..0.5f64,
        v in 0.05..1.0f64,
        w in 150.0..1500.0f64,
        t0 in -400.0..400.0f64,
    ) {
        let taus = ScanConfig::new(-4000.0, 4000.0, 321).unwrap().taus();
        let ps = taus
            .iter()
            .map(|t| b * (1.0 - v * (-4.0 * LN_2 * (t - t0).powi(2) / (w * w)).exp()))
            .collect();
        let m = fit_dip(&InterferenceScan::new(taus, ps).unwrap()).unwrap();
        prop_assert!((m.baseline / b - 1.0).abs() < 1e-6);
        prop_assert!((m.fit_visibility / v - 1.0).abs() < 1e-6);
        prop_assert!((m.fwhm * 1000.0 / w - 1.0).abs() < 1e-6);
        prop_assert!((m.center_fs - t0).abs() < 1e-4 * w);
    }
}
