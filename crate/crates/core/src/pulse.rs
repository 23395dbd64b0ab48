//! Prototype pulses for GFDM and WCP-COQAM, Zak-domain orthogonalization for
//! offset-QAM use, and the Hann edge window.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp::fft_raw;
use crate::error::{invalid, Error, Result};

/// Bandwidth-time product of the Gaussian pulse when none is given.
pub const DEFAULT_GAUSSIAN_BT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseKind {
    RaisedCosine,
    RootRaisedCosine,
    /// Periodic sinc, i.e. a rectangle of M bins in the MK-point spectrum.
    Dirichlet,
    Gaussian {
        bt: f64,
    },
    /// Constant over the first K samples, zero elsewhere (OFDM).
    Rectangular,
}

impl PulseKind {
    pub fn gaussian() -> Self {
        PulseKind::Gaussian {
            bt: DEFAULT_GAUSSIAN_BT,
        }
    }
}

/// Where the symmetric pulse families put their peak.
///
/// `Sample` samples the continuous pulse at t = (n - MK/2)/K, which is even
/// about n = MK/2 (and circularly about n = 0). `HalfSample` uses
/// t = (n - (MK-1)/2)/K, which is even about (MK-1)/2 = D/2; the
/// offset-QAM modulator needs this one for real-field orthogonality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseCenter {
    Sample,
    HalfSample,
}

impl PulseCenter {
    fn position(self, len: usize) -> f64 {
        match self {
            PulseCenter::Sample => len as f64 / 2.0,
            PulseCenter::HalfSample => (len as f64 - 1.0) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulsePrototype {
    taps: Vec<f64>,
    kind: PulseKind,
    rolloff: f64,
    subcarriers: usize,
    slots: usize,
    center: PulseCenter,
    orthogonalized: bool,
}

impl PulsePrototype {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn kind(&self) -> PulseKind {
        self.kind
    }

    pub fn rolloff(&self) -> f64 {
        self.rolloff
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn center(&self) -> PulseCenter {
        self.center
    }

    pub fn is_orthogonalized(&self) -> bool {
        self.orthogonalized
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Largest deviation from even symmetry about the pulse's own center.
    pub fn symmetry_error(&self) -> f64 {
        let n = self.taps.len();
        (0..n)
            .map(|i| {
                let mirror = match self.center {
                    PulseCenter::Sample => (n - i) % n,
                    PulseCenter::HalfSample => n - 1 - i,
                };
                (self.taps[i] - self.taps[mirror]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Builds a unit-energy pulse of length K*M sampled at K samples per symbol,
/// peaked at n = MK/2.
pub fn build_prototype(kind: PulseKind, k: usize, m: usize, rolloff: f64) -> Result<PulsePrototype> {
    build_prototype_centered(kind, k, m, rolloff, PulseCenter::Sample)
}

pub fn build_prototype_centered(
    kind: PulseKind,
    k: usize,
    m: usize,
    rolloff: f64,
    center: PulseCenter,
) -> Result<PulsePrototype> {
    if k < 2 {
        return invalid(format!("need at least 2 subcarriers, got {k}"));
    }
    if m < 1 {
        return invalid("need at least one time slot");
    }
    if matches!(kind, PulseKind::RaisedCosine | PulseKind::RootRaisedCosine) && !(0.0..=1.0).contains(&rolloff) {
        return invalid(format!("roll-off must lie in [0, 1], got {rolloff}"));
    }
    if let PulseKind::Gaussian { bt } = kind {
        if !(bt > 0.0 && bt.is_finite()) {
            return invalid(format!("Gaussian BT must be positive, got {bt}"));
        }
    }

    let n = k * m;
    let c = center.position(n);
    let mut taps: Vec<f64> = match kind {
        PulseKind::Rectangular => (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect(),
        _ => (0..n)
            .map(|i| {
                let t = (i as f64 - c) / k as f64;
                match kind {
                    PulseKind::RaisedCosine => raised_cosine(t, rolloff),
                    PulseKind::RootRaisedCosine => root_raised_cosine(t, rolloff),
                    PulseKind::Dirichlet => dirichlet(t, m),
                    PulseKind::Gaussian { bt } => gaussian(t, bt),
                    PulseKind::Rectangular => unreachable!(),
                }
            })
            .collect(),
    };
    normalize_energy(&mut taps)?;

    Ok(PulsePrototype {
        taps,
        kind,
        rolloff,
        subcarriers: k,
        slots: m,
        center,
        orthogonalized: false,
    })
}

fn normalize_energy(taps: &mut [f64]) -> Result<()> {
    let e: f64 = taps.iter().map(|t| t * t).sum();
    if !(e > 0.0 && e.is_finite()) {
        return invalid("pulse has no energy");
    }
    let s = 1.0 / e.sqrt();
    taps.iter_mut().for_each(|t| *t *= s);
    Ok(())
}

/// Raised-cosine impulse response, symbol period 1.
pub fn raised_cosine(t: f64, alpha: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0;
    }
    let x = 2.0 * alpha * t;
    if (x.abs() - 1.0).abs() < 1e-12 {
        // limit at t = ±1/(2α)
        return PI / 4.0 * sinc(1.0 / (2.0 * alpha));
    }
    (PI * t).sin() * (PI * alpha * t).cos() / (PI * t * (1.0 - x * x))
}

fn root_raised_cosine(t: f64, alpha: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - alpha + 4.0 * alpha / PI;
    }
    if alpha > 0.0 && ((4.0 * alpha * t).abs() - 1.0).abs() < 1e-12 {
        let a = PI / (4.0 * alpha);
        return alpha / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - alpha)).sin() + 4.0 * alpha * t * (PI * t * (1.0 + alpha)).cos();
    num / (PI * t * (1.0 - (4.0 * alpha * t).powi(2)))
}

fn dirichlet(t: f64, m: usize) -> f64 {
    let s = (PI * t / m as f64).sin();
    if s.abs() < 1e-12 {
        return 1.0;
    }
    (PI * t).sin() / (m as f64 * s)
}

fn gaussian(t: f64, bt: f64) -> f64 {
    let sigma = std::f64::consts::LN_2.sqrt() / (2.0 * PI * bt);
    (-t * t / (2.0 * sigma * sigma)).exp()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zak-domain orthogonalization for offset-QAM filter banks.
///
/// The Zak transform is taken over the K polyphase residues,
/// `Z[r][θ] = Σ_l p[r + lK] e^{-j2πlθ/M}`. Each coefficient and its partner
/// at residue `r + K/2` are divided by the root of their summed energy,
/// which turns the half-symbol-hop Gabor system into a tight frame. For a
/// pulse even about D/2 this gives a real-orthonormal WCP-COQAM basis.
pub fn dzt_orthogonalize(p: &PulsePrototype) -> Result<PulsePrototype> {
    let (k, m) = (p.subcarriers, p.slots);
    if k % 2 != 0 {
        return invalid(format!("offset-QAM orthogonalization needs even K, got {k}"));
    }
    if p.taps.len() != k * m {
        return invalid(format!("pulse length {} != K*M = {}", p.taps.len(), k * m));
    }

    let mut zak: Vec<Vec<Complex64>> = (0..k)
        .map(|r| {
            let mut col: Vec<Complex64> = (0..m).map(|l| Complex64::new(p.taps[r + l * k], 0.0)).collect();
            fft_raw(&mut col, false);
            col
        })
        .collect();

    let peak = zak.iter().flatten().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let half = k / 2;
    let (low, high) = zak.split_at_mut(half);
    for (r, (a, b)) in low.iter_mut().zip(high.iter_mut()).enumerate() {
        for (theta, (za, zb)) in a.iter_mut().zip(b.iter_mut()).enumerate() {
            let e = za.norm_sqr() + zb.norm_sqr();
            if e <= peak * 1e-24 {
                return Err(Error::DegeneratePulse {
                    residue: r,
                    phase: theta,
                });
            }
            let s = 1.0 / e.sqrt();
            *za *= s;
            *zb *= s;
        }
    }

    let mut taps = vec![0.0; k * m];
    for (r, col) in zak.iter_mut().enumerate() {
        fft_raw(col, true);
        for (l, v) in col.iter().enumerate() {
            taps[r + l * k] = v.re / m as f64;
        }
    }
    normalize_energy(&mut taps)?;

    Ok(PulsePrototype {
        taps,
        orthogonalized: true,
        ..p.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowTaps {
    taps: Vec<f64>,
    ramp_len: usize,
}

impl WindowTaps {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn ramp_len(&self) -> usize {
        self.ramp_len
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

/// Flat window with Hann ramps of `ramp_len` samples at both ends. The ramp
/// skips the exact zeros: `w[i] = 0.5(1 - cos(π(i+1)/(ramp_len+1)))`.
pub fn edge_window(total_len: usize, ramp_len: usize) -> Result<WindowTaps> {
    if 2 * ramp_len > total_len {
        return invalid(format!(
            "ramp of {ramp_len} samples does not fit twice into {total_len}"
        ));
    }
    let mut taps = vec![1.0; total_len];
    for i in 0..ramp_len {
        let w = 0.5 * (1.0 - (PI * (i + 1) as f64 / (ramp_len + 1) as f64).cos());
        taps[i] = w;
        taps[total_len - 1 - i] = w;
    }
    Ok(WindowTaps { taps, ramp_len })
}
