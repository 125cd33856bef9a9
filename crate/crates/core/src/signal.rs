//! Sampled complex baseband signals, fast-time × slow-time matrices and the
//! FFT plumbing shared by every processing stage.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A uniformly sampled complex baseband sequence.
///
/// `t0` is the time of the first sample relative to the pulse reference
/// instant (e.g. `-T_p/2` for a centered chirp).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub t0: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, t0: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            t0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Sum of `|x|²` over samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Mean power per sample.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    /// Copy scaled to unit mean power per sample.
    pub fn normalized_to_unit_power(&self) -> Self {
        let p = self.mean_power();
        let g = if p > 0.0 { 1.0 / p.sqrt() } else { 1.0 };
        Self {
            samples: self.samples.iter().map(|s| s * g).collect(),
            sample_rate: self.sample_rate,
            t0: self.t0,
        }
    }
}

/// The set of baseband frequencies a pulse occupies.
///
/// Compression filters are applied only on occupied FFT bins; everything
/// else is zeroed.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralSupport {
    /// Every bin.
    Full,
    /// Contiguous band `[low_hz, high_hz]`.
    Band { low_hz: f64, high_hz: f64 },
    /// Bins within half a spacing of an active subcarrier index.
    /// `indices` must be sorted ascending.
    Subcarriers { spacing_hz: f64, indices: Vec<i64> },
}

impl SpectralSupport {
    pub fn contains(&self, f: f64) -> bool {
        match self {
            SpectralSupport::Full => true,
            SpectralSupport::Band { low_hz, high_hz } => f >= *low_hz && f <= *high_hz,
            SpectralSupport::Subcarriers {
                spacing_hz,
                indices,
            } => {
                let m = (f / spacing_hz).round() as i64;
                indices.binary_search(&m).is_ok()
            }
        }
    }

    /// Occupied bandwidth in Hz; `Full` occupies the whole sample rate.
    pub fn bandwidth(&self, sample_rate: f64) -> f64 {
        match self {
            SpectralSupport::Full => sample_rate,
            SpectralSupport::Band { low_hz, high_hz } => high_hz - low_hz,
            SpectralSupport::Subcarriers {
                spacing_hz,
                indices,
            } => spacing_hz * indices.len() as f64,
        }
    }

    /// Occupancy mask over the `n` bins of an FFT at `sample_rate`.
    pub fn mask(&self, n: usize, sample_rate: f64) -> Vec<bool> {
        (0..n)
            .map(|k| self.contains(bin_frequency(k, n, sample_rate)))
            .collect()
    }
}

/// Signed frequency of FFT bin `k` out of `n`.
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let signed = if k <= (n - 1) / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    };
    signed * sample_rate / n as f64
}

/// Forward/inverse FFT plans of one size. The inverse is normalized by `1/n`.
#[derive(Clone)]
pub struct FftPair {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// Zero-pads (or errors if longer) `x` to `n` samples.
pub fn zero_padded(x: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    if x.len() > n {
        return Err(invalid(format!(
            "signal of {} samples does not fit in {n} samples",
            x.len()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[..x.len()].copy_from_slice(x);
    Ok(out)
}

/// Circularly shifts `spectrum` (bins of an `n`-point FFT) by `shift` samples
/// via a linear phase ramp. Sub-sample shifts are exact for band-limited
/// content.
pub fn apply_delay_in_place(spectrum: &mut [Complex64], shift_samples: f64) {
    let n = spectrum.len();
    for (k, v) in spectrum.iter_mut().enumerate() {
        let f = bin_frequency(k, n, 1.0);
        *v *= Complex64::from_polar(1.0, -2.0 * PI * f * shift_samples);
    }
}

/// Projection of `x` onto the bins of `support` (circular, length `x.len()`).
pub fn band_limit(x: &[Complex64], support: &SpectralSupport, sample_rate: f64) -> Vec<Complex64> {
    let fft = FftPair::new(x.len());
    let mut buf = x.to_vec();
    fft.forward(&mut buf);
    for (v, keep) in buf.iter_mut().zip(support.mask(x.len(), sample_rate)) {
        if !keep {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    fft.inverse(&mut buf);
    buf
}

/// Fast-time × slow-time complex matrix with axis metadata.
///
/// Rows are pulses, columns are fast-time samples. Column `i` sits at
/// `fast_time_origin + i / sample_rate` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FastTimeMatrix {
    pub data: Array2<Complex64>,
    pub sample_rate: f64,
    pub fast_time_origin: f64,
    pub slow_time: Vec<f64>,
}

impl FastTimeMatrix {
    pub fn new(
        data: Array2<Complex64>,
        sample_rate: f64,
        fast_time_origin: f64,
        slow_time: Vec<f64>,
    ) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if slow_time.len() != data.nrows() {
            return Err(invalid(format!(
                "{} slow-time stamps for {} pulses",
                slow_time.len(),
                data.nrows()
            )));
        }
        Ok(Self {
            data,
            sample_rate,
            fast_time_origin,
            slow_time,
        })
    }

    pub fn n_pulses(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_fast(&self) -> usize {
        self.data.ncols()
    }

    pub fn fast_time(&self, i: usize) -> f64 {
        self.fast_time_origin + i as f64 / self.sample_rate
    }
}
