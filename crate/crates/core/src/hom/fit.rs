//! Gaussian dip fit P(τ) = B·(1 − V·exp(−4 ln2·(τ−τ₀)²/w²)) by Levenberg–Marquardt.

use std::f64::consts::LN_2;

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use super::InterferenceScan;
use crate::{Error, FitInit, Result};

const MAX_ITERATIONS: usize = 200;
const MIN_VISIBILITY: f64 = 1e-3;
const STEP_TOLERANCE: f64 = 1e-10;
const COST_TOLERANCE: f64 = 1e-14;
const MAX_DAMPING: f64 = 1e12;

/// Fitted dip parameters. `visibility` is 1 − P(τ₀)/B with P read off the scan
/// at the fitted center; `fit_visibility` is the model parameter V and
/// `raw_visibility` is 1 − min(P)/B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipMetrics {
    pub visibility: f64,
    /// Dip FWHM in ps.
    #[serde(rename = "fwhm_ps")]
    pub fwhm: f64,
    pub baseline: f64,
    /// RMS of the fit residuals.
    pub fit_residual: f64,
    pub center_fs: f64,
    pub fit_visibility: f64,
    pub raw_visibility: f64,
}

impl DipMetrics {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }
}

fn model(p: &Vector4<f64>, tau: f64) -> (f64, Vector4<f64>) {
    let (b, v, t0, w) = (p[0], p[1], p[2], p[3]);
    let x = tau - t0;
    let g = (-4.0 * LN_2 * x * x / (w * w)).exp();
    let value = b * (1.0 - v * g);
    let bvg = b * v * g;
    let grad = Vector4::new(
        1.0 - v * g,
        -b * g,
        -bvg * 8.0 * LN_2 * x / (w * w),
        -bvg * 8.0 * LN_2 * x * x / (w * w * w),
    );
    (value, grad)
}

fn cost(p: &Vector4<f64>, taus: &[f64], ys: &[f64]) -> f64 {
    taus.iter()
        .zip(ys)
        .map(|(t, y)| {
            let r = y - model(p, *t).0;
            r * r
        })
        .sum()
}

fn initial_guess(taus: &[f64], ys: &[f64]) -> Result<FitInit> {
    let n = ys.len();
    let edge = ((n as f64 * 0.05).round() as usize).max(1);
    let baseline = (ys[..edge].iter().sum::<f64>() + ys[n - edge..].iter().sum::<f64>())
        / (2 * edge) as f64;
    let (k_min, &y_min) = ys
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    let visibility = if baseline > 0.0 { 1.0 - y_min / baseline } else { 0.0 };
    if !(visibility >= MIN_VISIBILITY) {
        return Err(Error::NoDip { visibility });
    }
    let half = baseline * (1.0 - 0.5 * visibility);
    let crossing = |range: &mut dyn Iterator<Item = usize>| {
        let mut prev = k_min;
        for k in range {
            if ys[k] >= half {
                let (y0, y1) = (ys[prev], ys[k]);
                let f = if y1 != y0 { (half - y0) / (y1 - y0) } else { 0.0 };
                return Some(taus[prev] + f * (taus[k] - taus[prev]));
            }
            prev = k;
        }
        None
    };
    let left = crossing(&mut (0..k_min).rev());
    let right = crossing(&mut (k_min + 1..n));
    let span = taus[n - 1] - taus[0];
    let fwhm_fs = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (taus[k_min] - l),
        (None, Some(r)) => 2.0 * (r - taus[k_min]),
        (None, None) => 0.25 * span,
    }
    .max(span / n as f64);
    Ok(FitInit {
        baseline,
        visibility,
        center_fs: taus[k_min],
        fwhm_fs,
    })
}

/// Quadratic interpolation of the scan through the three samples nearest `tau`.
fn interpolate(taus: &[f64], ys: &[f64], tau: f64) -> Option<f64> {
    let n = taus.len();
    if tau < taus[0] || tau > taus[n - 1] {
        return None;
    }
    let nearest = taus
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - tau).abs().total_cmp(&(b.1 - tau).abs()))
        .map(|(k, _)| k)?;
    let k = nearest.clamp(1, n - 2);
    let (x0, x1, x2) = (taus[k - 1], taus[k], taus[k + 1]);
    let l0 = (tau - x1) * (tau - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (tau - x0) * (tau - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (tau - x0) * (tau - x1) / ((x2 - x0) * (x2 - x1));
    Some(l0 * ys[k - 1] + l1 * ys[k] + l2 * ys[k + 1])
}

/// Fits the dip model to a scan.
pub fn fit_dip(scan: &InterferenceScan) -> Result<DipMetrics> {
    fit_dip_with_limit(scan, MAX_ITERATIONS)
}

pub(crate) fn fit_dip_with_limit(scan: &InterferenceScan, max_iterations: usize) -> Result<DipMetrics> {
    let taus = scan.taus();
    let ys = scan.probabilities();
    if taus.len() < 5 {
        return Err(Error::invalid("dip fit needs at least 5 samples"));
    }
    let init = initial_guess(taus, ys)?;
    let mut p = Vector4::new(init.baseline, init.visibility, init.center_fs, init.fwhm_fs);
    let mut current = cost(&p, taus, ys);
    let mut damping = 1e-3;
    let mut converged = false;

    for _ in 0..max_iterations {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (t, y) in taus.iter().zip(ys) {
            let (value, grad) = model(&p, *t);
            jtj += grad * grad.transpose();
            jtr += grad * (y - value);
        }
        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut lhs = jtj;
            for i in 0..4 {
                lhs[(i, i)] += damping * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = lhs.lu().solve(&jtr) else {
                damping *= 10.0;
                continue;
            };
            let trial = p + step;
            let trial_cost = if trial[3] > 0.0 { cost(&trial, taus, ys) } else { f64::INFINITY };
            if trial_cost <= current {
                let scale = [p[0].abs(), 1.0, p[3].abs(), p[3].abs()];
                let small = (0..4).all(|i| step[i].abs() <= STEP_TOLERANCE * scale[i])
                    || current - trial_cost <= COST_TOLERANCE * current;
                p = trial;
                current = trial_cost;
                damping = (damping * 0.1).max(1e-12);
                accepted = true;
                converged = small;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // no downhill step left at any damping: a minimum to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged || !p.iter().all(|x| x.is_finite()) {
        return Err(Error::FitFailure {
            iterations: max_iterations,
            init,
        });
    }

    let (baseline, fit_visibility, center_fs, w) = (p[0], p[1], p[2], p[3].abs());
    let at_center = interpolate(taus, ys, center_fs).unwrap_or(baseline * (1.0 - fit_visibility));
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DipMetrics {
        visibility: (1.0 - at_center / baseline).clamp(0.0, 1.0),
        fwhm: w / 1000.0,
        baseline,
        fit_residual: (current / ys.len() as f64).sqrt(),
        center_fs,
        fit_visibility,
        raw_visibility: (1.0 - y_min / baseline).clamp(0.0, 1.0),
    })
}
