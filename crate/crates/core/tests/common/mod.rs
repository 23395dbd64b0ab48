//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;

use mcwave::spectral::PsdEstimate;
use num_complex::Complex64;

/// Unnormalized DFT by direct summation, `sign` = -1 forward, +1 inverse.
pub fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, v)| v * Complex64::from_polar(1.0, sign * 2.0 * PI * (k * i % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Offset-QAM atom `q[(n - mK/2) mod N] e^{j2πk(n - D/2)/K} e^{jπ(k+m)/2}`
/// evaluated term by term.
pub fn coqam_atom(q: &[f64], k_sub: usize, k: usize, m: usize) -> Vec<Complex64> {
    let n = q.len();
    let d = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let tap = q[(i + n - (m * k_sub / 2) % n) % n];
            let ph = 2.0 * PI * k as f64 * (i as f64 - d / 2.0) / k_sub as f64 + PI / 2.0 * (k + m) as f64;
            Complex64::from_polar(tap, ph)
        })
        .collect()
}

/// `Re<b_{k,m}, b_{k',m'}>` for all carrier offsets of one slot pair,
/// indexed by `Δk + K - 1` for Δk = k' - k in (-K, K).
pub fn coqam_gram_row(q: &[f64], k_sub: usize, m: usize, mp: usize) -> Vec<f64> {
    let n = q.len();
    let d = (n - 1) as f64;
    let mut fold = vec![Complex64::new(0.0, 0.0); k_sub];
    for i in 0..n {
        let a = q[(i + n - (m * k_sub / 2) % n) % n];
        let b = q[(i + n - (mp * k_sub / 2) % n) % n];
        fold[i % k_sub] += a * b;
    }
    // S(Δ) = Σ_r fold[r] e^{+j2πΔr/K}
    let s = naive_dft(&fold, 1.0);
    let dm = mp as f64 - m as f64;
    (-(k_sub as i64 - 1)..k_sub as i64)
        .map(|dk| {
            let base = s[dk.rem_euclid(k_sub as i64) as usize];
            let ph = -PI * dk as f64 * d / k_sub as f64 + PI / 2.0 * (dk as f64 + dm);
            (base * Complex64::from_polar(1.0, ph)).re
        })
        .collect()
}

/// Largest deviation of the real offset-QAM Gram matrix from the identity.
pub fn coqam_gram_max_deviation(q: &[f64], k_sub: usize, slots: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for m in 0..2 * slots {
        for mp in 0..2 * slots {
            for (j, v) in coqam_gram_row(q, k_sub, m, mp).iter().enumerate() {
                let ideal = if m == mp && j == k_sub - 1 { 1.0 } else { 0.0 };
                worst = worst.max((v - ideal).abs());
            }
        }
    }
    worst
}

/// Linear-domain ±0.05 F_s read-out of every curve at `center`.
pub fn readouts(curves: &[&PsdEstimate], center: f64) -> Vec<f64> {
    curves
        .iter()
        .map(|c| c.band_mean_db(center, 0.05).expect("band inside the estimate"))
        .collect()
}

/// Largest spread among curves over read-out centers in [lo, hi], with
/// the center at which it occurs.
pub fn max_spread(curves: &[&PsdEstimate], lo: f64, hi: f64) -> (f64, f64) {
    let steps = ((hi - lo) / 0.05).round() as usize;
    (0..=steps)
        .map(|i| {
            let c = lo + i as f64 * 0.05;
            let v = readouts(curves, c);
            let spread = v.iter().copied().fold(f64::MIN, f64::max) - v.iter().copied().fold(f64::MAX, f64::min);
            (spread, c)
        })
        .fold((0.0, lo), |a, b| if b.0 > a.0 { b } else { a })
}

/// Number of binomial standard deviations between `errors / n` and `p`.
pub fn binomial_z(errors: u64, n: u64, p: f64) -> f64 {
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    (errors as f64 / n as f64 - p) / sd
}

/// Writes a verdict line straight to stderr so it survives output capture.
pub fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion}: {verdict} {detail}");
}
