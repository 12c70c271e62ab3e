//! Brute-force evidence of the line model on a regular grid over the prior.

use conest::Dataset;
use rayon::prelude::*;

pub const AMP: (f64, f64) = (1.0, 100.0);
pub const WIDTH: (f64, f64) = (0.15, 15.0);
pub const LOC: (f64, f64) = (600.0, 1000.0);

/// Midpoint rule in unit-cube coordinates, so every cell carries equal prior
/// mass. The likelihood is `L0 · exp(a·S1 − a²·S2/2)` with
/// `S1 = Σ x·g/σ²` and `S2 = Σ g²/σ²` for the unit-amplitude profile `g`;
/// both sums are formed once per (width, location) cell.
pub fn ln_evidence(d: &Dataset, n_amp: usize, n_width: usize, n_loc: usize) -> f64 {
    let mid = |k: usize, n: usize| (k as f64 + 0.5) / n as f64;
    let amps: Vec<f64> = (0..n_amp)
        .map(|k| AMP.0 * (AMP.1 / AMP.0).powf(mid(k, n_amp)))
        .collect();
    let lam = d.wavelengths();
    let x = d.flux();
    let w: Vec<f64> = d.flux_err().iter().map(|s| 1.0 / (s * s)).collect();
    let ln_l0: f64 = x
        .iter()
        .zip(d.flux_err())
        .map(|(x, s)| -0.5 * (x / s).powi(2) - 0.5 * (2.0 * std::f64::consts::PI * s * s).ln())
        .sum();

    // per width row: (max exponent, sum of exp(exponent - max))
    let rows: Vec<(f64, f64)> = (0..n_width)
        .into_par_iter()
        .map(|j| {
            let width = WIDTH.0 * (WIDTH.1 / WIDTH.0).powf(mid(j, n_width));
            let mut exps = Vec::with_capacity(n_amp * n_loc);
            for k in 0..n_loc {
                let loc = LOC.0 + (LOC.1 - LOC.0) * mid(k, n_loc);
                let (mut s1, mut s2) = (0.0, 0.0);
                for i in 0..lam.len() {
                    let g = (-(lam[i] - loc).powi(2) / (2.0 * width * width)).exp();
                    s1 += x[i] * g * w[i];
                    s2 += g * g * w[i];
                }
                exps.extend(amps.iter().map(|a| a * s1 - 0.5 * a * a * s2));
            }
            let m = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (m, exps.iter().map(|e| (e - m).exp()).sum())
        })
        .collect();
    let m = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = rows.iter().map(|(rm, s)| s * (rm - m).exp()).sum();
    ln_l0 + m + total.ln() - ((n_amp * n_width * n_loc) as f64).ln()
}
