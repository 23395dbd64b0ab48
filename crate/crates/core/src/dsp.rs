//! Numerical primitives shared by the modem, spectral and link modules.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// A block of complex baseband samples.
///
/// `sample_rate` is expressed in multiples of the nominal rate F_s, so an
/// unoversampled frame has rate 1.0 and a sixfold interpolated one has 6.0.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return invalid("signal must contain at least one sample");
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return invalid(format!("sample rate must be positive, got {sample_rate}"));
        }
        let signal = Self { samples, sample_rate };
        if !signal.energy().is_finite() {
            return invalid("signal energy is not finite");
        }
        Ok(signal)
    }

    /// Signal at the nominal rate F_s.
    pub fn baseband(samples: Vec<Complex64>) -> Result<Self> {
        Self::new(samples, 1.0)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }
}

pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|s| s.norm_sqr()).sum()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized in-place FFT. `inverse` selects the e^{+j} kernel.
pub(crate) fn fft_raw(buf: &mut [Complex64], inverse: bool) {
    if buf.len() <= 1 {
        return;
    }
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        }
    });
    fft.process(buf);
}

/// Unitary in-place FFT (1/sqrt(N) in both directions).
pub(crate) fn fft_unitary(buf: &mut [Complex64], inverse: bool) {
    fft_raw(buf, inverse);
    let scale = 1.0 / (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
}

/// Unitary discrete Fourier transform. Forward uses e^{-j2πkn/N}.
pub fn dft(signal: &ComplexSignal, inverse: bool) -> Result<ComplexSignal> {
    let mut out = signal.samples.clone();
    fft_unitary(&mut out, inverse);
    ComplexSignal::new(out, signal.sample_rate)
}

/// `out[i] = seq[(i - shift) mod N]`.
pub fn circular_shift<T: Clone>(seq: &[T], shift: i64) -> Vec<T> {
    let n = seq.len();
    if n == 0 {
        return Vec::new();
    }
    let s = shift.rem_euclid(n as i64) as usize;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&seq[n - s..]);
    out.extend_from_slice(&seq[..n - s]);
    out
}

/// Gaussian tail probability Q(x) = P(Z > x) for standard normal Z.
pub fn qfunc(x: f64) -> Result<f64> {
    if x.is_nan() {
        return invalid("qfunc of NaN");
    }
    Ok(0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2))
}
