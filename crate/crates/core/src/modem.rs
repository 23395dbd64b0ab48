//! Symbol mapping, grid construction and the OFDM, GFDM and WCP-COQAM
//! transmitters.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dsp::{fft_raw, ComplexSignal};
use crate::error::{invalid, Error, Result};
use crate::pulse::{build_prototype, PulseCenter, PulseKind, PulsePrototype, WindowTaps};

/// Sign of the subcarrier exponent in the GFDM synthesis sum,
/// `e^{SIGN·j2πkn/K}`. Flipping it to +1 only mirrors the subcarrier index.
pub const GFDM_EXPONENT_SIGN: f64 = -1.0;

/// Baseline numerology.
pub const BASELINE_SUBCARRIERS: usize = 128;
pub const BASELINE_SLOTS: usize = 9;
pub const BASELINE_CP_LEN: usize = 32;
pub const BASELINE_OCCUPIED: usize = 76;
pub const BASELINE_ROLLOFF: f64 = 0.1;
pub const BASELINE_WINDOW_RAMP: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Ofdm,
    Gfdm,
    WcpCoqam,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Ofdm, Scheme::Gfdm, Scheme::WcpCoqam];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Ofdm => "OFDM",
            Scheme::Gfdm => "GFDM",
            Scheme::WcpCoqam => "WCP-COQAM",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('_', "-").as_str() {
            "OFDM" => Ok(Scheme::Ofdm),
            "GFDM" => Ok(Scheme::Gfdm),
            "WCP-COQAM" | "COQAM" => Ok(Scheme::WcpCoqam),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Immutable transmitter/receiver configuration for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ModemConfig {
    scheme: Scheme,
    subcarriers: usize,
    slots: usize,
    cp_len: usize,
    occupied: Vec<usize>,
    window_ramp: usize,
    pulse: PulsePrototype,
}

impl ModemConfig {
    pub fn new(
        scheme: Scheme,
        subcarriers: usize,
        slots: usize,
        cp_len: usize,
        occupied: Vec<usize>,
        window_ramp: usize,
        pulse: PulsePrototype,
    ) -> Result<Self> {
        if subcarriers < 2 || slots < 1 {
            return invalid(format!("bad frame size K={subcarriers}, M={slots}"));
        }
        if occupied.len() > subcarriers {
            return invalid("more occupied subcarriers than subcarriers");
        }
        if occupied.windows(2).any(|w| w[0] >= w[1]) || occupied.iter().any(|&k| k >= subcarriers) {
            return invalid("occupied set must be strictly increasing indices below K");
        }
        if pulse.len() != subcarriers * slots {
            return invalid(format!("pulse length {} != K*M = {}", pulse.len(), subcarriers * slots));
        }
        if scheme == Scheme::Ofdm && slots != 1 {
            return invalid("OFDM frames have a single time slot");
        }
        if scheme == Scheme::WcpCoqam {
            if !subcarriers.is_multiple_of(2) {
                return invalid("WCP-COQAM needs an even number of subcarriers");
            }
            if !pulse.is_orthogonalized() {
                return Err(Error::Precondition("WCP-COQAM needs an orthogonalized pulse".into()));
            }
        }
        if 2 * window_ramp > subcarriers * slots + cp_len {
            return invalid("window ramps longer than the frame");
        }
        Ok(Self {
            scheme,
            subcarriers,
            slots,
            cp_len,
            occupied,
            window_ramp,
            pulse,
        })
    }

    /// OFDM with `n_occupied` centered carriers and a rectangular pulse.
    pub fn ofdm(subcarriers: usize, n_occupied: usize, cp_len: usize, window_ramp: usize) -> Result<Self> {
        let pulse = build_prototype(PulseKind::Rectangular, subcarriers, 1, 0.0)?;
        Self::new(
            Scheme::Ofdm,
            subcarriers,
            1,
            cp_len,
            centered_occupied(subcarriers, n_occupied)?,
            window_ramp,
            pulse,
        )
    }

    pub fn gfdm(
        subcarriers: usize,
        slots: usize,
        n_occupied: usize,
        cp_len: usize,
        window_ramp: usize,
        pulse: PulsePrototype,
    ) -> Result<Self> {
        Self::new(
            Scheme::Gfdm,
            subcarriers,
            slots,
            cp_len,
            centered_occupied(subcarriers, n_occupied)?,
            window_ramp,
            pulse,
        )
    }

    pub fn wcp_coqam(
        subcarriers: usize,
        slots: usize,
        n_occupied: usize,
        cp_len: usize,
        window_ramp: usize,
        pulse: PulsePrototype,
    ) -> Result<Self> {
        Self::new(
            Scheme::WcpCoqam,
            subcarriers,
            slots,
            cp_len,
            centered_occupied(subcarriers, n_occupied)?,
            window_ramp,
            pulse,
        )
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Number of grid columns: M for complex schemes, 2M for WCP-COQAM.
    pub fn grid_columns(&self) -> usize {
        match self.scheme {
            Scheme::WcpCoqam => 2 * self.slots,
            _ => self.slots,
        }
    }

    /// Samples per frame before the cyclic prefix.
    pub fn block_len(&self) -> usize {
        self.subcarriers * self.slots
    }

    pub fn frame_len(&self) -> usize {
        self.block_len() + self.cp_len
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn occupied(&self) -> &[usize] {
        &self.occupied
    }

    /// Complex data symbols carried per frame.
    pub fn symbols_per_frame(&self) -> usize {
        self.occupied.len() * self.slots
    }

    pub fn window_ramp(&self) -> usize {
        self.window_ramp
    }

    pub fn pulse(&self) -> &PulsePrototype {
        &self.pulse
    }
}

/// Occupied carriers as a contiguous block around DC in the FFT-shifted view.
///
/// The shifted indices `-K/2 ..= K/2-1` lose `(K - n)/2` carriers at each end
/// (the odd one out, if any, from the negative end); DC stays occupied.
pub fn centered_occupied(subcarriers: usize, n_occupied: usize) -> Result<Vec<usize>> {
    if n_occupied > subcarriers {
        return invalid(format!("{n_occupied} occupied of {subcarriers} subcarriers"));
    }
    let guards = subcarriers - n_occupied;
    let low = -(subcarriers as i64 / 2) + (guards - guards / 2) as i64;
    let mut idx: Vec<usize> = (0..n_occupied as i64)
        .map(|j| (low + j).rem_euclid(subcarriers as i64) as usize)
        .collect();
    idx.sort_unstable();
    Ok(idx)
}

/// Gray-mapped unit-energy 4-QAM: (b0, b1) -> ((1-2b0) + j(1-2b1))/sqrt 2.
pub fn map_qam4(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return invalid(format!("4-QAM needs an even bit count, got {}", bits.len()));
    }
    if bits.iter().any(|&b| b > 1) {
        return invalid("bits must be 0 or 1");
    }
    Ok(bits
        .chunks_exact(2)
        .map(|b| {
            Complex64::new(
                (1.0 - 2.0 * b[0] as f64) * FRAC_1_SQRT_2,
                (1.0 - 2.0 * b[1] as f64) * FRAC_1_SQRT_2,
            )
        })
        .collect())
}

/// Minimum-distance 4-QAM decisions. Points on a boundary go to the
/// (0,0) side.
pub fn demap_qam4(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}

/// Nearest 4-QAM constellation point.
pub fn slice_qam4(s: Complex64) -> Complex64 {
    Complex64::new(
        if s.re < 0.0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
        if s.im < 0.0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridValues {
    Complex(Vec<Complex64>),
    Real(Vec<f64>),
}

/// K rows (subcarriers) by `columns` time slots, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    subcarriers: usize,
    columns: usize,
    occupied: Vec<usize>,
    values: GridValues,
    symbol_variance: f64,
}

impl SymbolGrid {
    pub fn zeros_complex(subcarriers: usize, columns: usize, occupied: Vec<usize>) -> Self {
        Self {
            subcarriers,
            columns,
            occupied,
            values: GridValues::Complex(vec![Complex64::new(0.0, 0.0); subcarriers * columns]),
            symbol_variance: 1.0,
        }
    }

    pub fn zeros_real(subcarriers: usize, columns: usize, occupied: Vec<usize>) -> Self {
        Self {
            subcarriers,
            columns,
            occupied,
            values: GridValues::Real(vec![0.0; subcarriers * columns]),
            symbol_variance: 1.0,
        }
    }

    pub fn zeros_for(cfg: &ModemConfig) -> Self {
        match cfg.scheme {
            Scheme::WcpCoqam => Self::zeros_real(cfg.subcarriers, cfg.grid_columns(), cfg.occupied.clone()),
            _ => Self::zeros_complex(cfg.subcarriers, cfg.grid_columns(), cfg.occupied.clone()),
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn occupied(&self) -> &[usize] {
        &self.occupied
    }

    pub fn values(&self) -> &GridValues {
        &self.values
    }

    pub fn symbol_variance(&self) -> f64 {
        self.symbol_variance
    }

    pub fn is_real(&self) -> bool {
        matches!(self.values, GridValues::Real(_))
    }

    pub fn complex(&self) -> Option<&[Complex64]> {
        match &self.values {
            GridValues::Complex(v) => Some(v),
            GridValues::Real(_) => None,
        }
    }

    pub fn complex_mut(&mut self) -> Option<&mut [Complex64]> {
        match &mut self.values {
            GridValues::Complex(v) => Some(v),
            GridValues::Real(_) => None,
        }
    }

    pub fn real(&self) -> Option<&[f64]> {
        match &self.values {
            GridValues::Real(v) => Some(v),
            GridValues::Complex(_) => None,
        }
    }

    pub fn real_mut(&mut self) -> Option<&mut [f64]> {
        match &mut self.values {
            GridValues::Real(v) => Some(v),
            GridValues::Complex(_) => None,
        }
    }

    pub fn index(&self, k: usize, column: usize) -> usize {
        k * self.columns + column
    }

    /// Complex data symbols on the occupied carriers, carrier-major. Real
    /// offset-QAM pairs (2m, 2m+1) are recombined as Re + jIm.
    pub fn data_symbols(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for &k in &self.occupied {
            match &self.values {
                GridValues::Complex(v) => {
                    out.extend((0..self.columns).map(|m| v[k * self.columns + m]));
                }
                GridValues::Real(v) => {
                    out.extend(
                        (0..self.columns / 2)
                            .map(|m| Complex64::new(v[k * self.columns + 2 * m], v[k * self.columns + 2 * m + 1])),
                    );
                }
            }
        }
        out
    }
}

/// Places data symbols on the occupied carriers; guard rows stay zero.
///
/// Symbol `j*M + m` goes to the j-th occupied carrier, slot m. For WCP-COQAM
/// its real and imaginary parts become real symbols at slots 2m and 2m+1.
pub fn build_symbol_grid(symbols: &[Complex64], cfg: &ModemConfig) -> Result<SymbolGrid> {
    let expected = cfg.symbols_per_frame();
    if symbols.len() != expected {
        return invalid(format!("expected {expected} symbols, got {}", symbols.len()));
    }
    let mut grid = SymbolGrid::zeros_for(cfg);
    let cols = grid.columns;
    let m = cfg.slots;
    match &mut grid.values {
        GridValues::Complex(v) => {
            for (j, &k) in cfg.occupied.iter().enumerate() {
                v[k * cols..k * cols + m].copy_from_slice(&symbols[j * m..(j + 1) * m]);
            }
        }
        GridValues::Real(v) => {
            for (j, &k) in cfg.occupied.iter().enumerate() {
                for s in 0..m {
                    let c = symbols[j * m + s];
                    v[k * cols + 2 * s] = c.re;
                    v[k * cols + 2 * s + 1] = c.im;
                }
            }
        }
    }
    Ok(grid)
}

fn check_grid(grid: &SymbolGrid, cfg: &ModemConfig) -> Result<()> {
    if grid.subcarriers != cfg.subcarriers || grid.columns != cfg.grid_columns() {
        return invalid(format!(
            "grid {}x{} does not match config {}x{}",
            grid.subcarriers,
            grid.columns,
            cfg.subcarriers,
            cfg.grid_columns()
        ));
    }
    Ok(())
}

/// `out[r] = Σ_k d[k] e^{SIGN·j2πkr/K}` for r in 0..K.
pub(crate) fn carrier_synthesis(d: &mut [Complex64]) {
    fft_raw(d, GFDM_EXPONENT_SIGN > 0.0);
}

/// Inverse of [`carrier_synthesis`] including the 1/K factor.
pub(crate) fn carrier_analysis(f: &mut [Complex64]) {
    fft_raw(f, GFDM_EXPONENT_SIGN < 0.0);
    let s = 1.0 / f.len() as f64;
    f.iter_mut().for_each(|v| *v *= s);
}

/// GFDM synthesis
/// `x[n] = Σ_k Σ_m d[k,m] p[(n - mK) mod MK] e^{-j2πkn/K}`, n in 0..MK.
///
/// The k-sum only depends on n mod K, so each slot costs one K-point FFT.
/// OFDM is the M = 1 rectangular-pulse case.
pub fn gfdm_modulate(grid: &SymbolGrid, cfg: &ModemConfig) -> Result<ComplexSignal> {
    if cfg.scheme == Scheme::WcpCoqam {
        return Err(Error::Precondition("gfdm_modulate needs an OFDM or GFDM config".into()));
    }
    check_grid(grid, cfg)?;
    let d = grid
        .complex()
        .ok_or_else(|| Error::InvalidArgument("GFDM needs a complex grid".into()))?;
    let (k, m) = (cfg.subcarriers, cfg.slots);
    let n = k * m;
    let p = cfg.pulse.taps();
    if p.len() != n {
        return invalid("pulse/config length mismatch");
    }

    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut col = vec![Complex64::new(0.0, 0.0); k];
    for slot in 0..m {
        for (kk, c) in col.iter_mut().enumerate() {
            *c = d[kk * m + slot];
        }
        if col.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
            continue;
        }
        carrier_synthesis(&mut col);
        let shift = slot * k;
        for (i, xi) in x.iter_mut().enumerate() {
            let tap = p[(i + n - shift) % n];
            if tap != 0.0 {
                *xi += col[i % k] * tap;
            }
        }
    }
    ComplexSignal::baseband(x)
}

/// Per-carrier factor `e^{jπk/2} e^{-jπkD/K}` of the offset-QAM synthesis,
/// with D = MK - 1.
pub(crate) fn coqam_carrier_phase(k: usize, subcarriers: usize, block: usize) -> Complex64 {
    let d = (block - 1) as f64;
    Complex64::from_polar(
        1.0,
        FRAC_PI_2 * (k % 4) as f64 - PI * (k as f64) * d / subcarriers as f64,
    )
}

/// `e^{jπm/2}`
pub(crate) fn quarter_turn(m: usize) -> Complex64 {
    match m % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// WCP-COQAM synthesis
/// `x[n] = Σ_k Σ_{m<2M} d[k,m] p[(n - mK/2) mod N] e^{j2π(k/K)(n - D/2)} e^{jπ(k+m)/2}`
/// with N = MK and D = N - 1.
pub fn wcp_coqam_modulate(grid: &SymbolGrid, cfg: &ModemConfig) -> Result<ComplexSignal> {
    if cfg.scheme != Scheme::WcpCoqam {
        return Err(Error::Precondition(
            "wcp_coqam_modulate needs a WCP-COQAM config".into(),
        ));
    }
    if !cfg.pulse.is_orthogonalized() {
        return Err(Error::Precondition("pulse is not orthogonalized".into()));
    }
    check_grid(grid, cfg)?;
    let d = grid
        .real()
        .ok_or_else(|| Error::InvalidArgument("WCP-COQAM needs a real grid".into()))?;
    let (k, m) = (cfg.subcarriers, cfg.slots);
    let n = k * m;
    let cols = 2 * m;
    let hop = k / 2;
    let p = cfg.pulse.taps();
    let phase: Vec<Complex64> = (0..k).map(|kk| coqam_carrier_phase(kk, k, n)).collect();

    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut col = vec![Complex64::new(0.0, 0.0); k];
    for slot in 0..cols {
        let turn = quarter_turn(slot);
        let mut any = false;
        for (kk, c) in col.iter_mut().enumerate() {
            let v = d[kk * cols + slot];
            any |= v != 0.0;
            *c = phase[kk] * turn * v;
        }
        if !any {
            continue;
        }
        // Σ_k c_k e^{+j2πkn/K}
        fft_raw(&mut col, true);
        let shift = slot * hop;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += col[i % k] * p[(i + n - shift) % n];
        }
    }
    ComplexSignal::baseband(x)
}

/// Modulates a grid with whichever synthesis the config's scheme uses.
pub fn modulate(grid: &SymbolGrid, cfg: &ModemConfig) -> Result<ComplexSignal> {
    match cfg.scheme {
        Scheme::WcpCoqam => wcp_coqam_modulate(grid, cfg),
        _ => gfdm_modulate(grid, cfg),
    }
}

/// Prepends the last `cp_len` samples.
pub fn add_cp(signal: &ComplexSignal, cp_len: usize) -> Result<ComplexSignal> {
    let n = signal.len();
    if cp_len >= n {
        return invalid(format!("cyclic prefix {cp_len} not shorter than block {n}"));
    }
    let s = signal.samples();
    let mut out = Vec::with_capacity(n + cp_len);
    out.extend_from_slice(&s[n - cp_len..]);
    out.extend_from_slice(s);
    ComplexSignal::new(out, signal.sample_rate())
}

pub fn apply_edge_window(signal: &ComplexSignal, w: &WindowTaps) -> Result<ComplexSignal> {
    if w.len() != signal.len() {
        return invalid(format!("window length {} != signal length {}", w.len(), signal.len()));
    }
    let out = signal.samples().iter().zip(w.taps()).map(|(s, t)| s * *t).collect();
    ComplexSignal::new(out, signal.sample_rate())
}

/// Modulation, cyclic prefix and (if the config has a ramp) edge window.
pub fn transmit_frame(grid: &SymbolGrid, cfg: &ModemConfig) -> Result<ComplexSignal> {
    let x = add_cp(&modulate(grid, cfg)?, cfg.cp_len)?;
    if cfg.window_ramp == 0 {
        return Ok(x);
    }
    let w = crate::pulse::edge_window(x.len(), cfg.window_ramp)?;
    apply_edge_window(&x, &w)
}

/// Baseline GFDM configuration with the RC pulse (roll-off 0.1).
pub fn baseline_gfdm(n_occupied: usize, window_ramp: usize) -> Result<ModemConfig> {
    let pulse = build_prototype(
        PulseKind::RaisedCosine,
        BASELINE_SUBCARRIERS,
        BASELINE_SLOTS,
        BASELINE_ROLLOFF,
    )?;
    ModemConfig::gfdm(
        BASELINE_SUBCARRIERS,
        BASELINE_SLOTS,
        n_occupied,
        BASELINE_CP_LEN,
        window_ramp,
        pulse,
    )
}

/// Baseline WCP-COQAM configuration: RC pulse sampled symmetrically about
/// D/2 and orthogonalized in the Zak domain.
pub fn baseline_wcp_coqam(n_occupied: usize, window_ramp: usize) -> Result<ModemConfig> {
    let pulse = crate::pulse::build_prototype_centered(
        PulseKind::RaisedCosine,
        BASELINE_SUBCARRIERS,
        BASELINE_SLOTS,
        BASELINE_ROLLOFF,
        PulseCenter::HalfSample,
    )?;
    let pulse = crate::pulse::dzt_orthogonalize(&pulse)?;
    ModemConfig::wcp_coqam(
        BASELINE_SUBCARRIERS,
        BASELINE_SLOTS,
        n_occupied,
        BASELINE_CP_LEN,
        window_ramp,
        pulse,
    )
}
