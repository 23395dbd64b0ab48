//! Channel model, receiver bank and symbol-error accounting.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::{fft_raw, qfunc, ComplexSignal};
use crate::error::{invalid, Error, Result};
use crate::modem::{
    carrier_analysis, carrier_synthesis, coqam_carrier_phase, gfdm_modulate, map_qam4, quarter_turn, slice_qam4,
    ModemConfig, Scheme, SymbolGrid,
};

/// COST-207 hilly terrain, reduced 6-path profile.
pub const COST207_HT_DELAYS_US: [f64; 6] = [0.0, 0.1, 0.3, 0.5, 15.0, 17.2];
pub const COST207_HT_POWERS_DB: [f64; 6] = [0.0, -1.5, -4.5, -7.5, -8.0, -17.7];
/// Puts the 17.2 µs excess delay at 31 samples, inside a 32-sample CP.
pub const COST207_SAMPLE_RATE_MHZ: f64 = 1.8;

/// CFO is quoted in units of F_s / CFO_REFERENCE_LEN.
pub const CFO_REFERENCE_LEN: usize = 1152;
pub const DEFAULT_CFO_SWEEP: [f64; 4] = [0.0, 0.05, 0.10, 0.15];
pub const DEFAULT_DSIC_ITERS: usize = 3;

/// RNG stream reserved for the static channel draw.
const CHANNEL_STREAM: u64 = u64::MAX;
const SINGULAR_BIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTap {
    pub delay: usize,
    pub gain: Complex64,
}

/// Static multipath channel with carrier frequency offset and AWGN.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    taps: Vec<ChannelTap>,
    cfo_frac: f64,
    noise_var: f64,
    seed: u64,
    cfo_reference_len: usize,
}

impl ChannelSpec {
    /// Taps sharing a delay are merged and the total power is scaled to one.
    pub fn new(taps: Vec<ChannelTap>, cfo_frac: f64, noise_var: f64, seed: u64) -> Result<Self> {
        if taps.is_empty() {
            return invalid("channel needs at least one tap");
        }
        if !cfo_frac.is_finite() {
            return invalid("CFO must be finite");
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return invalid(format!(
                "noise variance must be finite and non-negative, got {noise_var}"
            ));
        }
        let mut merged: Vec<ChannelTap> = Vec::with_capacity(taps.len());
        for t in taps {
            match merged.iter_mut().find(|m| m.delay == t.delay) {
                Some(m) => m.gain += t.gain,
                None => merged.push(t),
            }
        }
        merged.sort_by_key(|t| t.delay);
        let power: f64 = merged.iter().map(|t| t.gain.norm_sqr()).sum();
        if !(power > 0.0 && power.is_finite()) {
            return invalid("channel taps carry no power");
        }
        let s = 1.0 / power.sqrt();
        merged.iter_mut().for_each(|t| t.gain *= s);
        Ok(Self {
            taps: merged,
            cfo_frac,
            noise_var,
            seed,
            cfo_reference_len: CFO_REFERENCE_LEN,
        })
    }

    pub fn identity() -> Self {
        Self::new(
            vec![ChannelTap {
                delay: 0,
                gain: Complex64::new(1.0, 0.0),
            }],
            0.0,
            0.0,
            0,
        )
        .expect("unit tap is a valid channel")
    }

    /// One complex-Gaussian realization of the COST-207 HT profile, drawn
    /// from `seed` and kept for the whole experiment.
    pub fn cost207_hilly_terrain(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(CHANNEL_STREAM);
        let taps = COST207_HT_DELAYS_US
            .iter()
            .zip(COST207_HT_POWERS_DB)
            .map(|(&d, p)| {
                let amp = (10f64.powf(p / 10.0) / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                ChannelTap {
                    delay: (d * COST207_SAMPLE_RATE_MHZ).round() as usize,
                    gain: Complex64::new(re, im) * amp,
                }
            })
            .collect();
        Self::new(taps, 0.0, 0.0, seed)
    }

    pub fn with_cfo(mut self, cfo_frac: f64) -> Self {
        self.cfo_frac = cfo_frac;
        self
    }

    pub fn with_noise_var(mut self, noise_var: f64) -> Self {
        self.noise_var = noise_var.max(0.0);
        self
    }

    /// Noise variance per complex sample for unit-energy symbols.
    pub fn with_snr_db(self, snr_db: f64) -> Self {
        self.with_noise_var(10f64.powf(-snr_db / 10.0))
    }

    /// Sets the block length whose subcarrier spacing is the CFO unit.
    pub fn with_cfo_reference(mut self, len: usize) -> Self {
        self.cfo_reference_len = len.max(1);
        self
    }

    pub fn taps(&self) -> &[ChannelTap] {
        &self.taps
    }

    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay).max().unwrap_or(0)
    }

    pub fn cfo_frac(&self) -> f64 {
        self.cfo_frac
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cfo_reference_len(&self) -> usize {
        self.cfo_reference_len
    }

    /// Unnormalized n-point DFT of the impulse response.
    pub fn frequency_response(&self, n: usize) -> Result<Vec<Complex64>> {
        channel_frequency_response(&self.taps, n)
    }
}

pub fn channel_frequency_response(taps: &[ChannelTap], n: usize) -> Result<Vec<Complex64>> {
    if n == 0 {
        return invalid("frequency response needs at least one bin");
    }
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for t in taps {
        h[t.delay % n] += t.gain;
    }
    fft_raw(&mut h, false);
    Ok(h)
}

/// `r[n] = (h * s)[n] e^{j2π ε n / N_ref} + w[n]` over the full linear
/// convolution length; w has variance `noise_var / 2` per dimension.
pub fn apply_channel<R: Rng + ?Sized>(signal: &ComplexSignal, ch: &ChannelSpec, rng: &mut R) -> Result<ComplexSignal> {
    let x = signal.samples();
    let memory = ch.max_delay();
    if x.len() <= memory {
        return invalid(format!(
            "signal of {} samples shorter than channel memory {memory}",
            x.len()
        ));
    }
    let mut y = vec![Complex64::new(0.0, 0.0); x.len() + memory];
    for t in &ch.taps {
        for (yi, xi) in y[t.delay..].iter_mut().zip(x) {
            *yi += xi * t.gain;
        }
    }
    if ch.cfo_frac != 0.0 {
        let w = 2.0 * PI * ch.cfo_frac / ch.cfo_reference_len as f64;
        for (n, v) in y.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, w * n as f64);
        }
    }
    if ch.noise_var > 0.0 {
        let sd = (ch.noise_var / 2.0).sqrt();
        for v in y.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *v += Complex64::new(re, im) * sd;
        }
    }
    ComplexSignal::new(y, signal.sample_rate())
}

fn strip_cp<'a>(rx: &'a ComplexSignal, cfg: &ModemConfig) -> Result<&'a [Complex64]> {
    let (cp, n) = (cfg.cp_len(), cfg.block_len());
    if rx.len() < cp + n {
        return invalid(format!("received {} samples, frame needs {}", rx.len(), cp + n));
    }
    Ok(&rx.samples()[cp..cp + n])
}

fn check_response(ch_freq: &[Complex64], n: usize) -> Result<()> {
    if ch_freq.len() != n {
        return invalid(format!("channel response has {} bins, block has {n}", ch_freq.len()));
    }
    if let Some((bin, h)) = ch_freq.iter().enumerate().find(|(_, h)| h.norm() < SINGULAR_BIN) {
        return Err(Error::SingularChannel {
            bin,
            magnitude: h.norm(),
        });
    }
    Ok(())
}

/// Single-tap ZF over the whole block, back in the time domain.
fn equalize_block(block: &[Complex64], ch_freq: &[Complex64]) -> Result<Vec<Complex64>> {
    check_response(ch_freq, block.len())?;
    if ch_freq.iter().all(|h| h.re == 1.0 && h.im == 0.0) {
        return Ok(block.to_vec());
    }
    let mut buf = block.to_vec();
    fft_raw(&mut buf, false);
    buf.iter_mut().zip(ch_freq).for_each(|(v, h)| *v /= h);
    fft_raw(&mut buf, true);
    let s = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= s);
    Ok(buf)
}

/// CP removal, K-point DFT and per-bin ZF with the true response.
pub fn ofdm_receive(rx: &ComplexSignal, cfg: &ModemConfig, ch_freq: &[Complex64]) -> Result<SymbolGrid> {
    if cfg.scheme() != Scheme::Ofdm {
        return Err(Error::Precondition("ofdm_receive needs an OFDM config".into()));
    }
    let k = cfg.subcarriers();
    let block = strip_cp(rx, cfg)?;
    check_response(ch_freq, k)?;
    let mut y = block.to_vec();
    fft_raw(&mut y, false);
    let scale = 1.0 / (k as f64).sqrt();
    let mut grid = SymbolGrid::zeros_for(cfg);
    let out = grid.complex_mut().expect("OFDM grids are complex");
    // the transmitter puts carrier k on DFT bin (-k) mod K
    for &kk in cfg.occupied() {
        let bin = (k - kk) % k;
        out[kk] = y[bin] / ch_freq[bin] * scale;
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Receiver {
    Zf,
    Mf,
    MfDsic,
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Receiver::Zf => "ZF",
            Receiver::Mf => "MF",
            Receiver::MfDsic => "MF-DSIC",
        })
    }
}

impl FromStr for Receiver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('_', "-").as_str() {
            "ZF" => Ok(Receiver::Zf),
            "MF" => Ok(Receiver::Mf),
            "MF-DSIC" | "DSIC" => Ok(Receiver::MfDsic),
            other => Err(Error::Config(format!("unknown receiver '{other}'"))),
        }
    }
}

/// `P̂_r(θ)`, the M-point DFT of each polyphase branch `p[r + lK]`, stored
/// as `zak[r * M + θ]`.
fn pulse_zak(taps: &[f64], k: usize, m: usize) -> Vec<Complex64> {
    let mut zak = vec![Complex64::new(0.0, 0.0); k * m];
    for r in 0..k {
        let row = &mut zak[r * m..(r + 1) * m];
        for (l, z) in row.iter_mut().enumerate() {
            *z = Complex64::new(taps[r + l * k], 0.0);
        }
        fft_raw(row, false);
    }
    zak
}

/// Applies `f(P̂_r(θ), Ŷ_r(θ))` per branch and returns `c[m][r]` as
/// `out[m * K + r]`.
fn polyphase_filter(
    y: &[Complex64],
    zak: &[Complex64],
    k: usize,
    m: usize,
    f: impl Fn(Complex64, Complex64) -> Complex64,
) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); k * m];
    let mut branch = vec![Complex64::new(0.0, 0.0); m];
    let inv_m = 1.0 / m as f64;
    for r in 0..k {
        for (l, b) in branch.iter_mut().enumerate() {
            *b = y[r + l * k];
        }
        fft_raw(&mut branch, false);
        for (t, b) in branch.iter_mut().enumerate() {
            *b = f(zak[r * m + t], *b);
        }
        fft_raw(&mut branch, true);
        for (s, b) in branch.iter().enumerate() {
            out[s * k + r] = b * inv_m;
        }
    }
    out
}

/// `A^H y` for the GFDM modulation matrix A, all K×M entries.
fn gfdm_matched_filter(y: &[Complex64], zak: &[Complex64], k: usize, m: usize) -> Vec<Complex64> {
    let mut u = polyphase_filter(y, zak, k, m, |p, v| p.conj() * v);
    let mut d = vec![Complex64::new(0.0, 0.0); k * m];
    for s in 0..m {
        let col = &mut u[s * k..(s + 1) * k];
        carrier_analysis(col);
        for (kk, v) in col.iter().enumerate() {
            d[kk * m + s] = v * k as f64;
        }
    }
    d
}

/// `A^{-1} y`.
fn gfdm_zero_forcing(y: &[Complex64], zak: &[Complex64], k: usize, m: usize) -> Result<Vec<Complex64>> {
    let peak = zak.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(i) = zak.iter().position(|z| z.norm() <= peak * 1e-12) {
        return Err(Error::SingularMatrix(format!(
            "pulse polyphase branch {} vanishes at phase bin {}",
            i / m,
            i % m
        )));
    }
    let mut c = polyphase_filter(y, zak, k, m, |p, v| v / p);
    let mut d = vec![Complex64::new(0.0, 0.0); k * m];
    for s in 0..m {
        let col = &mut c[s * k..(s + 1) * k];
        carrier_analysis(col);
        for (kk, v) in col.iter().enumerate() {
            d[kk * m + s] = *v;
        }
    }
    Ok(d)
}

/// `g[Δk, Δm] = Σ_n p[n] p[n - ΔmK] e^{∓j2πΔk n/K}`, the entries of `A^H A`,
/// stored as `g[Δk * M + Δm]`.
fn gram_kernel(taps: &[f64], k: usize, m: usize) -> Vec<Complex64> {
    let n = k * m;
    let mut g = vec![Complex64::new(0.0, 0.0); k * m];
    let mut fold = vec![Complex64::new(0.0, 0.0); k];
    for dm in 0..m {
        fold.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for i in 0..n {
            fold[i % k] += taps[i] * taps[(i + n - dm * k) % n];
        }
        carrier_synthesis(&mut fold);
        for (dk, v) in fold.iter().enumerate() {
            g[dk * m + dm] = *v;
        }
    }
    g
}

/// Double-sided serial interference cancellation on top of the MF output.
///
/// Keeps `res = y_MF - A^H A d̂` up to date, so a changed decision costs one
/// pass over the occupied symbols.
fn dsic(y_mf: &[Complex64], cfg: &ModemConfig, iters: usize) -> Result<Vec<Complex64>> {
    let (k, m) = (cfg.subcarriers(), cfg.slots());
    let occ = cfg.occupied();
    let mut dec = SymbolGrid::zeros_for(cfg);
    {
        let dv = dec.complex_mut().expect("GFDM grids are complex");
        for &kk in occ {
            for s in 0..m {
                dv[kk * m + s] = slice_qam4(y_mf[kk * m + s]);
            }
        }
    }
    let taps = cfg.pulse().taps();
    let zak = pulse_zak(taps, k, m);
    let gdec = gfdm_matched_filter(gfdm_modulate(&dec, cfg)?.samples(), &zak, k, m);
    let mut res: Vec<Complex64> = y_mf.iter().zip(&gdec).map(|(a, b)| a - b).collect();
    let g = gram_kernel(taps, k, m);
    let g0 = g[0];
    let dv = dec.complex_mut().expect("GFDM grids are complex");

    for _ in 0..iters {
        for &kk in occ {
            for s in 0..m {
                let i = kk * m + s;
                let z = res[i] + g0 * dv[i];
                let new = slice_qam4(z);
                let delta = new - dv[i];
                if delta.re == 0.0 && delta.im == 0.0 {
                    continue;
                }
                dv[i] = new;
                for &kp in occ {
                    let dk = (kk + k - kp) % k;
                    for sp in 0..m {
                        let dm = (s + m - sp) % m;
                        res[kp * m + sp] -= g[dk * m + dm] * delta;
                    }
                }
            }
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); k * m];
    for &kk in occ {
        for s in 0..m {
            let i = kk * m + s;
            out[i] = res[i] + g0 * dv[i];
        }
    }
    Ok(out)
}

/// CP removal, block-wide single-tap ZF, then ZF, MF or MF-DSIC detection.
/// With zero DSIC iterations the MF output is returned unchanged.
pub fn gfdm_receive(
    rx: &ComplexSignal,
    cfg: &ModemConfig,
    ch_freq: &[Complex64],
    mode: Receiver,
    dsic_iters: usize,
) -> Result<SymbolGrid> {
    if cfg.scheme() == Scheme::WcpCoqam {
        return Err(Error::Precondition("gfdm_receive needs an OFDM or GFDM config".into()));
    }
    let (k, m) = (cfg.subcarriers(), cfg.slots());
    let y = equalize_block(strip_cp(rx, cfg)?, ch_freq)?;
    let zak = pulse_zak(cfg.pulse().taps(), k, m);
    let full = match mode {
        Receiver::Zf => gfdm_zero_forcing(&y, &zak, k, m)?,
        Receiver::Mf => gfdm_matched_filter(&y, &zak, k, m),
        Receiver::MfDsic => {
            let mf = gfdm_matched_filter(&y, &zak, k, m);
            if dsic_iters == 0 {
                mf
            } else {
                dsic(&mf, cfg, dsic_iters)?
            }
        }
    };
    let mut grid = SymbolGrid::zeros_for(cfg);
    let out = grid.complex_mut().expect("GFDM grids are complex");
    for &kk in cfg.occupied() {
        out[kk * m..(kk + 1) * m].copy_from_slice(&full[kk * m..(kk + 1) * m]);
    }
    Ok(grid)
}

/// Offset-QAM analysis
/// `d̂[k,m] = Re{e^{-jπ(k+m)/2} Σ_n r[n] p[(n - mK/2) mod N] e^{-j2πk(n - D/2)/K}}`
/// after block-wide single-tap ZF.
pub fn coqam_receive(rx: &ComplexSignal, cfg: &ModemConfig, ch_freq: &[Complex64]) -> Result<SymbolGrid> {
    if cfg.scheme() != Scheme::WcpCoqam {
        return Err(Error::Precondition("coqam_receive needs a WCP-COQAM config".into()));
    }
    if !cfg.pulse().is_orthogonalized() {
        return Err(Error::Precondition("pulse is not orthogonalized".into()));
    }
    let (k, m) = (cfg.subcarriers(), cfg.slots());
    let n = k * m;
    let cols = 2 * m;
    let y = equalize_block(strip_cp(rx, cfg)?, ch_freq)?;
    let p = cfg.pulse().taps();
    let derotate: Vec<Complex64> = (0..k).map(|kk| coqam_carrier_phase(kk, k, n).conj()).collect();

    let mut grid = SymbolGrid::zeros_for(cfg);
    let out = grid.real_mut().expect("WCP-COQAM grids are real");
    let mut fold = vec![Complex64::new(0.0, 0.0); k];
    for slot in 0..cols {
        fold.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let shift = slot * k / 2;
        for (i, v) in y.iter().enumerate() {
            fold[i % k] += v * p[(i + n - shift) % n];
        }
        fft_raw(&mut fold, false);
        let turn = quarter_turn(slot).conj();
        for &kk in cfg.occupied() {
            out[kk * cols + slot] = (fold[kk] * derotate[kk] * turn).re;
        }
    }
    Ok(grid)
}

/// Dispatches to the receiver that matches the config's scheme. `mode` and
/// `dsic_iters` only matter for GFDM.
pub fn receive(
    rx: &ComplexSignal,
    cfg: &ModemConfig,
    ch_freq: &[Complex64],
    mode: Receiver,
    dsic_iters: usize,
) -> Result<SymbolGrid> {
    match cfg.scheme() {
        Scheme::Ofdm => ofdm_receive(rx, cfg, ch_freq),
        Scheme::Gfdm => gfdm_receive(rx, cfg, ch_freq, mode, dsic_iters),
        Scheme::WcpCoqam => coqam_receive(rx, cfg, ch_freq),
    }
}

/// Uniform random 4-QAM symbols.
pub fn random_qam4<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<Complex64> {
    let bits: Vec<u8> = (0..2 * count).map(|_| rng.random_range(0..2u8)).collect();
    map_qam4(&bits).expect("bits are 0/1 and even in number")
}

/// Hard-decision mismatches over the occupied symbols.
pub fn ser_count(tx: &SymbolGrid, rx: &SymbolGrid) -> Result<(usize, usize)> {
    if tx.subcarriers() != rx.subcarriers()
        || tx.columns() != rx.columns()
        || tx.occupied() != rx.occupied()
        || tx.is_real() != rx.is_real()
    {
        return invalid("grids differ in shape");
    }
    let a = tx.data_symbols();
    let b = rx.data_symbols();
    let errors = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| slice_qam4(**x) != slice_qam4(**y))
        .count();
    Ok((errors, a.len()))
}

/// `2Q(√γ) - Q(√γ)²`, exact 4-QAM SER at per-symbol SNR γ.
pub fn awgn_ser_4qam(snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() {
        return invalid("SNR is NaN");
    }
    let q = qfunc(10f64.powf(snr_db / 10.0).sqrt())?;
    Ok(2.0 * q - q * q)
}

pub fn awgn_ser_4qam_reference(snr_db_grid: &[f64]) -> Result<Vec<f64>> {
    snr_db_grid.iter().map(|&s| awgn_ser_4qam(s)).collect()
}

/// Error count at one (scheme, receiver, CFO, SNR) point.
#[derive(Debug, Clone, PartialEq)]
pub struct SerPoint {
    pub scheme: Scheme,
    pub receiver: Receiver,
    pub cfo_frac: f64,
    pub snr_db: f64,
    pub errors: u64,
    pub trials: u64,
    pub symbols_per_trial: u64,
}

impl SerPoint {
    pub fn ser(&self) -> f64 {
        let total = self.trials * self.symbols_per_trial;
        if total == 0 {
            0.0
        } else {
            self.errors as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SerCurve {
    pub points: Vec<SerPoint>,
}

impl SerCurve {
    pub fn find(&self, scheme: Scheme, receiver: Receiver, cfo_frac: f64, snr_db: f64) -> Option<&SerPoint> {
        self.points.iter().find(|p| {
            p.scheme == scheme
                && p.receiver == receiver
                && (p.cfo_frac - cfo_frac).abs() < 1e-12
                && (p.snr_db - snr_db).abs() < 1e-12
        })
    }
}

/// Symbol energy of the 4-QAM alphabet.
pub const QAM4_ENERGY: f64 = 2.0 * FRAC_1_SQRT_2 * FRAC_1_SQRT_2;
