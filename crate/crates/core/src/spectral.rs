//! Closed-form OFDM PSDs, the oversampling front end and averaged
//! periodograms.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp::{fft_raw, ComplexSignal};
use crate::error::{invalid, Result};
use crate::pulse::raised_cosine;

/// Sixfold interpolation with an 81-symbol RC filter, roll-off 0.1.
pub const OVERSAMPLING: usize = 6;
pub const INTERP_SPAN_SYMBOLS: usize = 81;
pub const INTERP_ROLLOFF: f64 = 0.1;

/// Linear PSD values are floored here before conversion to dB.
const LINEAR_FLOOR: f64 = 1e-300;

/// PSD on a normalized frequency grid (f / F_s), in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    freqs: Vec<f64>,
    values_db: Vec<f64>,
    peak_normalized: bool,
}

impl PsdEstimate {
    pub fn from_linear(freqs: Vec<f64>, linear: &[f64], normalize: bool) -> Result<Self> {
        if freqs.is_empty() || freqs.len() != linear.len() {
            return invalid("frequency grid and PSD values must be non-empty and equally long");
        }
        let values_db = linear.iter().map(|&v| 10.0 * v.max(LINEAR_FLOOR).log10()).collect();
        let est = Self {
            freqs,
            values_db,
            peak_normalized: false,
        };
        Ok(if normalize { est.peak_normalize() } else { est })
    }

    /// Shifts the curve so that its maximum is exactly 0 dB.
    pub fn peak_normalize(&self) -> Self {
        let peak = self.values_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            freqs: self.freqs.clone(),
            values_db: self.values_db.iter().map(|v| v - peak).collect(),
            peak_normalized: true,
        }
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values_db(&self) -> &[f64] {
        &self.values_db
    }

    pub fn is_peak_normalized(&self) -> bool {
        self.peak_normalized
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Linear-domain mean over all bins with `||f| - center| <= half_width`,
    /// i.e. both the positive and negative neighborhoods, returned in dB.
    pub fn band_mean_db(&self, center: f64, half_width: f64) -> Option<f64> {
        let (sum, n) = self
            .freqs
            .iter()
            .zip(&self.values_db)
            .filter(|(f, _)| (f.abs() - center).abs() <= half_width + 1e-12)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + 10f64.powf(v / 10.0), n + 1));
        (n > 0).then(|| 10.0 * (sum / n as f64).log10())
    }

    /// Value at the bin nearest to `f`.
    pub fn value_at(&self, f: f64) -> f64 {
        let i = self
            .freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.values_db[i]
    }
}

/// Dirichlet kernel `sin(πLx) / (L sin(πx))`, with the limit `(-1)^{x(L-1)}`
/// at integer x.
pub fn aliased_sinc(x: f64, l: usize) -> f64 {
    let r = x.round();
    let delta = x - r;
    // sin(πL(r+δ)) / sin(π(r+δ)) = (-1)^{r(L-1)} sin(πLδ) / sin(πδ)
    let sign = if (r as i64 * (l as i64 - 1)).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    if delta == 0.0 {
        return sign;
    }
    let lf = l as f64;
    sign * (PI * lf * delta).sin() / (lf * (PI * delta).sin())
}

/// Parameters of the sinc-superposition PSD of CP-OFDM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPsdConfig {
    /// K; the carrier spacing is 1/(K T_s).
    pub subcarriers: usize,
    /// Number of active carriers, a contiguous block centered on f = 0.
    pub occupied: usize,
    /// L, samples per symbol including the guard interval.
    pub frame_len: usize,
    pub guard_len: usize,
    /// M, the subcarrier multiplier of the equal-efficiency variant.
    pub slots: usize,
    pub symbol_variance: f64,
    /// Rate multiple at which the rectangular symbol is observed; the kernel
    /// is then periodic in `oversample * F_s`.
    pub oversample: usize,
}

impl AnalyticPsdConfig {
    pub fn new(subcarriers: usize, occupied: usize, frame_len: usize, guard_len: usize, slots: usize) -> Result<Self> {
        let cfg = Self {
            subcarriers,
            occupied,
            frame_len,
            guard_len,
            slots,
            symbol_variance: 1.0,
            oversample: OVERSAMPLING,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// K = 128, L = 128 + 32, N_guard = 32, M = 9.
    pub fn baseline(occupied: usize) -> Result<Self> {
        Self::new(128, occupied, 160, 32, 9)
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.subcarriers == 0 || self.slots == 0 || self.oversample == 0 {
            return invalid("K, M and the oversampling factor must be positive");
        }
        if self.occupied > self.subcarriers {
            return invalid("more occupied carriers than subcarriers");
        }
        if self.frame_len <= self.guard_len {
            return invalid(format!(
                "L = {} must exceed N_guard = {}",
                self.frame_len, self.guard_len
            ));
        }
        if !(self.symbol_variance >= 0.0 && self.symbol_variance.is_finite()) {
            return invalid("symbol variance must be finite and non-negative");
        }
        Ok(())
    }

    /// L' = M(L - N_guard) + N_guard.
    pub fn equal_se_frame_len(&self) -> usize {
        self.slots * (self.frame_len - self.guard_len) + self.guard_len
    }

    /// (total carriers, active carriers, symbol length) for either variant.
    fn layout(&self, equal_se: bool) -> (usize, usize, usize) {
        if equal_se {
            (
                self.slots * self.subcarriers,
                self.slots * self.occupied,
                self.equal_se_frame_len(),
            )
        } else {
            (self.subcarriers, self.occupied, self.frame_len)
        }
    }
}

/// `σ_c² Σ_k sinc_L((f - f_k) T_s)²` with the leading `1/(L T_s)` factor
/// dropped, so that the K- and MK-carrier variants share one multiplier.
pub fn analytic_psd_linear(cfg: &AnalyticPsdConfig, freqs: &[f64], equal_se: bool) -> Result<Vec<f64>> {
    cfg.validate()?;
    if freqs.is_empty() {
        return invalid("empty frequency grid");
    }
    if freqs.iter().any(|f| !f.is_finite()) {
        return invalid("frequency grid must be finite");
    }
    let (total, active, len) = cfg.layout(equal_se);
    let os = cfg.oversample as f64;
    let order = cfg.oversample * len;
    let centre = (active as f64 - 1.0) / 2.0;
    let carriers: Vec<f64> = (0..active).map(|j| (j as f64 - centre) / total as f64).collect();
    Ok(freqs
        .iter()
        .map(|&f| {
            cfg.symbol_variance
                * carriers
                    .iter()
                    .map(|fk| aliased_sinc((f - fk) / os, order).powi(2))
                    .sum::<f64>()
        })
        .collect())
}

/// Peak-normalized analytic PSD.
pub fn analytic_psd(cfg: &AnalyticPsdConfig, freqs: &[f64], equal_se: bool) -> Result<PsdEstimate> {
    let lin = analytic_psd_linear(cfg, freqs, equal_se)?;
    PsdEstimate::from_linear(freqs.to_vec(), &lin, true)
}

/// Drop of the analytic OFDM PSD at ±`f` when going from K to MK carriers,
/// with equal leading multipliers. The two sides are averaged linearly.
pub fn equal_se_gap_db(cfg: &AnalyticPsdConfig, f: f64) -> Result<f64> {
    let grid = [-f, f];
    let a = analytic_psd_linear(cfg, &grid, false)?;
    let b = analytic_psd_linear(cfg, &grid, true)?;
    Ok(10.0 * ((a[0] + a[1]) / (b[0] + b[1])).log10())
}

/// Same drop, but with each curve first normalized to its own 0 dB peak
/// over `freqs`.
pub fn equal_se_gap_peak_normalized_db(cfg: &AnalyticPsdConfig, freqs: &[f64], f: f64) -> Result<f64> {
    let a = analytic_psd(cfg, freqs, false)?;
    let b = analytic_psd(cfg, freqs, true)?;
    Ok((a.value_at(f) + a.value_at(-f)) / 2.0 - (b.value_at(f) + b.value_at(-f)) / 2.0)
}

/// Symmetric grid of `points` frequencies spanning [-half_span, half_span].
pub fn symmetric_grid(half_span: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| -half_span + 2.0 * half_span * i as f64 / (points - 1) as f64)
        .collect()
}

/// RC interpolation filter of `span * factor + 1` taps with unit center tap,
/// so constant inputs keep their level after zero-stuffing.
pub fn interpolation_filter(factor: usize, span: usize, rolloff: f64) -> Vec<f64> {
    let half = (span * factor) as f64 / 2.0;
    (0..=span * factor)
        .map(|i| raised_cosine((i as f64 - half) / factor as f64, rolloff))
        .collect()
}

/// Zero-stuffs by `factor`, filters with the RC interpolator and trims the
/// filter transient symmetrically so that the output has exactly
/// `factor * len` samples.
pub fn oversample_truncate(
    signal: &ComplexSignal,
    factor: usize,
    filt_symbol_span: usize,
    rolloff: f64,
) -> Result<ComplexSignal> {
    if factor == 0 {
        return invalid("oversampling factor must be at least 1");
    }
    if filt_symbol_span.is_multiple_of(2) {
        return invalid(format!("filter span must be odd, got {filt_symbol_span}"));
    }
    if !(0.0..=1.0).contains(&rolloff) {
        return invalid(format!("roll-off must lie in [0, 1], got {rolloff}"));
    }
    if factor == 1 {
        return Ok(signal.clone());
    }
    let h = interpolation_filter(factor, filt_symbol_span, rolloff);
    let n = signal.len();
    let out_len = factor * n;
    if out_len < h.len() {
        return invalid(format!(
            "oversampled length {out_len} is shorter than the {}-tap interpolator",
            h.len()
        ));
    }
    let x = signal.samples();
    let half = (h.len() - 1) / 2;
    let mut y = vec![Complex64::new(0.0, 0.0); out_len];
    for (i, yi) in y.iter_mut().enumerate() {
        // taps h[i + half - j*factor] for 0 <= i + half - j*factor <= 2*half
        let hi = i + half;
        let j_lo = hi.saturating_sub(2 * half).div_ceil(factor);
        let j_hi = (hi / factor).min(n - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in j_lo..=j_hi {
            acc += x[j] * h[hi - j * factor];
        }
        *yi = acc;
    }
    ComplexSignal::new(y, signal.sample_rate() * factor as f64)
}

/// Running sum of per-frame periodograms `|DFT(x)|² / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodogramAccumulator {
    sum: Vec<f64>,
    frames: usize,
    sample_rate: f64,
}

impl PeriodogramAccumulator {
    pub fn new(frame_len: usize, sample_rate: f64) -> Self {
        Self {
            sum: vec![0.0; frame_len],
            frames: 0,
            sample_rate,
        }
    }

    pub fn add(&mut self, frame: &ComplexSignal) -> Result<()> {
        if frame.len() != self.sum.len() {
            return invalid(format!("frame length {} != {}", frame.len(), self.sum.len()));
        }
        if frame.sample_rate() != self.sample_rate {
            return invalid("frames must share one sample rate");
        }
        let mut buf = frame.samples().to_vec();
        fft_raw(&mut buf, false);
        let scale = 1.0 / buf.len() as f64;
        for (s, v) in self.sum.iter_mut().zip(&buf) {
            *s += v.norm_sqr() * scale;
        }
        self.frames += 1;
        Ok(())
    }

    /// Adds another accumulator's frames after this one's.
    pub fn merge(&mut self, other: &PeriodogramAccumulator) -> Result<()> {
        if other.sum.len() != self.sum.len() || other.sample_rate != self.sample_rate {
            return invalid("cannot merge periodograms of different shapes");
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.frames += other.frames;
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// FFT-shifted frequency grid and mean linear periodogram.
    pub fn linear(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.frames == 0 {
            return invalid("no frames accumulated");
        }
        let n = self.sum.len();
        let mid = n / 2;
        let inv = 1.0 / self.frames as f64;
        let freqs = (0..n)
            .map(|i| (i as f64 - mid as f64) / n as f64 * self.sample_rate)
            .collect();
        let vals = (0..n).map(|i| self.sum[(i + n - mid) % n] * inv).collect();
        Ok((freqs, vals))
    }

    pub fn finish(&self) -> Result<PsdEstimate> {
        let (freqs, vals) = self.linear()?;
        PsdEstimate::from_linear(freqs, &vals, true)
    }
}

/// Averaged, FFT-shifted, peak-normalized periodogram of equal-length frames.
/// The frequency axis spans ±rate/2 in units of F_s.
pub fn periodogram_psd(frames: &[ComplexSignal]) -> Result<PsdEstimate> {
    let first = frames
        .first()
        .ok_or_else(|| crate::Error::InvalidArgument("no frames".into()))?;
    let mut acc = PeriodogramAccumulator::new(first.len(), first.sample_rate());
    for f in frames {
        acc.add(f)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn tone(n: usize, f: f64, rate: f64) -> ComplexSignal {
        ComplexSignal::new(
            (0..n)
                .map(|i| Complex64::from_polar(1.0, 2.0 * PI * f * i as f64 / rate))
                .collect(),
            rate,
        )
        .unwrap()
    }

    #[test]
    fn aliased_sinc_examples() {
        assert_eq!(aliased_sinc(0.0, 160), 1.0);
        assert_eq!(aliased_sinc(0.0, 7), 1.0);
        assert!(aliased_sinc(1.0 / 160.0, 160).abs() < 1e-15);
        assert!((aliased_sinc(0.25, 2) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(aliased_sinc(1.0, 4), -1.0);
        assert_eq!(aliased_sinc(1.0, 5), 1.0);
        for x in [0.013, 0.37, 1.2, -2.7] {
            assert!(aliased_sinc(x, 33).abs() <= 1.0 + 1e-15);
            let direct = (PI * 33.0 * x).sin() / (33.0 * (PI * x).sin());
            assert!((aliased_sinc(x, 33) - direct).abs() < 1e-9);
        }
        // continuity around an integer
        assert!((aliased_sinc(1.0 + 1e-9, 4) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn analytic_single_carrier_peaks_at_dc() {
        let cfg = AnalyticPsdConfig::new(1, 1, 4, 1, 1).unwrap();
        let grid = symmetric_grid(1.0, 201);
        let psd = analytic_psd(&cfg, &grid, false).unwrap();
        assert_eq!(psd.value_at(0.0), 0.0);
        assert!(psd.values_db().iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn analytic_matches_direct_summation() {
        let cfg = AnalyticPsdConfig::baseline(128).unwrap();
        let f = 0.75;
        let got = analytic_psd_linear(&cfg, &[f], false).unwrap()[0];
        let mut oracle = 0.0;
        for k in 0..128 {
            let fk = (k as f64 - 63.5) / 128.0;
            let x = (f - fk) / 6.0;
            let l = 960.0;
            let v = (PI * l * x).sin() / (l * (PI * x).sin());
            oracle += v * v;
        }
        assert!((10.0 * got.log10() - 10.0 * oracle.log10()).abs() < 1e-9);
    }

    #[test]
    fn analytic_is_even() {
        for occ in [128, 76] {
            let cfg = AnalyticPsdConfig::baseline(occ).unwrap();
            let grid = symmetric_grid(3.0, 601);
            for equal in [false, true] {
                let p = analytic_psd(&cfg, &grid, equal).unwrap();
                let v = p.values_db();
                for i in 0..v.len() {
                    assert!((v[i] - v[v.len() - 1 - i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn analytic_rejects_bad_input() {
        let cfg = AnalyticPsdConfig::baseline(128).unwrap();
        assert!(analytic_psd(&cfg, &[], false).is_err());
        assert!(AnalyticPsdConfig::new(128, 128, 32, 32, 9).is_err());
        assert_eq!(cfg.equal_se_frame_len(), 1184);
    }

    #[test]
    fn peak_normalization_idempotent() {
        let p = PsdEstimate::from_linear(vec![-1.0, 0.0, 1.0], &[0.5, 2.0, 1.0], true).unwrap();
        assert_eq!(p.values_db().iter().copied().fold(f64::MIN, f64::max), 0.0);
        assert_eq!(p.peak_normalize(), p);
    }

    #[test]
    fn oversample_identity_and_length() {
        let x = tone(50, 0.1, 1.0);
        assert_eq!(oversample_truncate(&x, 1, 81, 0.1).unwrap(), x);
        let x = tone(1184, 0.1, 1.0);
        let y = oversample_truncate(&x, 6, 81, 0.1).unwrap();
        assert_eq!(y.len(), 7104);
        assert_eq!(y.sample_rate(), 6.0);
        assert!(oversample_truncate(&tone(50, 0.1, 1.0), 6, 81, 0.1).is_err());
        assert!(oversample_truncate(&x, 6, 80, 0.1).is_err());
    }

    #[test]
    fn oversampled_tone_keeps_frequency_and_amplitude() {
        let x = tone(1184, 0.1, 1.0);
        let y = oversample_truncate(&x, 6, 81, 0.1).unwrap();
        let expect = tone(7104, 0.1, 6.0);
        // away from the 40-symbol filter transients at the block edges
        for i in 300..7104 - 300 {
            let ratio = y.samples()[i] / expect.samples()[i];
            assert!((ratio.norm() - 1.0).abs() < 0.01, "i={i} {ratio}");
            assert!(ratio.arg().abs() < 0.01);
        }
        let psd = periodogram_psd(&[y]).unwrap();
        let peak = psd.values_db().iter().position(|v| *v == 0.0).unwrap();
        assert!((psd.freqs()[peak] - 0.1).abs() <= 6.0 / 7104.0);
    }

    #[test]
    fn periodogram_tone_and_parseval() {
        let psd = periodogram_psd(&[tone(64, 0.25, 1.0)]).unwrap();
        let i = psd.values_db().iter().position(|v| *v == 0.0).unwrap();
        assert!((psd.freqs()[i] - 0.25).abs() < 1e-12);
        assert!(psd.freqs().windows(2).all(|w| w[0] < w[1]));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frames: Vec<ComplexSignal> = (0..5)
            .map(|_| {
                ComplexSignal::baseband(
                    (0..100)
                        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let mut acc = PeriodogramAccumulator::new(100, 1.0);
        for f in &frames {
            acc.add(f).unwrap();
        }
        let (_, lin) = acc.linear().unwrap();
        let mean_energy = frames.iter().map(|f| f.energy()).sum::<f64>() / 5.0;
        assert!((lin.iter().sum::<f64>() - mean_energy).abs() / mean_energy < 1e-10);

        let short = ComplexSignal::baseband(vec![Complex64::new(1.0, 0.0); 3]).unwrap();
        assert!(periodogram_psd(&[frames[0].clone(), short]).is_err());
        assert!(periodogram_psd(&[]).is_err());
    }

    #[test]
    fn white_noise_periodogram_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut acc = PeriodogramAccumulator::new(1024, 1.0);
        for _ in 0..300 {
            let f = ComplexSignal::baseband(
                (0..1024)
                    .map(|_| {
                        Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
                            * std::f64::consts::FRAC_1_SQRT_2
                    })
                    .collect(),
            )
            .unwrap();
            acc.add(&f).unwrap();
        }
        let psd = acc.finish().unwrap();
        let v = psd.values_db();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        assert!(sd < 0.5, "sd = {sd}");
    }

    #[test]
    fn merge_equals_sequential() {
        let frames: Vec<ComplexSignal> = (0..4).map(|i| tone(32, 0.05 * i as f64, 1.0)).collect();
        let mut whole = PeriodogramAccumulator::new(32, 1.0);
        frames.iter().for_each(|f| whole.add(f).unwrap());
        let mut a = PeriodogramAccumulator::new(32, 1.0);
        let mut b = PeriodogramAccumulator::new(32, 1.0);
        frames[..2].iter().for_each(|f| a.add(f).unwrap());
        frames[2..].iter().for_each(|f| b.add(f).unwrap());
        a.merge(&b).unwrap();
        assert_eq!(a.frames(), 4);
        let (_, x) = a.linear().unwrap();
        let (_, y) = whole.linear().unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn band_mean_reads_both_sides() {
        let p = PsdEstimate::from_linear(vec![-3.0, -1.0, 0.0, 1.0, 3.0], &[1.0, 0.1, 1.0, 0.3, 1.0], false).unwrap();
        let m = p.band_mean_db(1.0, 0.05).unwrap();
        assert!((m - 10.0 * 0.2f64.log10()).abs() < 1e-12);
        assert!(p.band_mean_db(2.0, 0.05).is_none());
    }
}
