//! Range compression by matched filtering, zero forcing and regularized zero
//! forcing, plus impulse-response quality metrics.
//!
//! All three filters act on the FFT of each fast-time row (FFT length equals
//! the row length, reference zero-padded). Bins outside the reference's
//! spectral support are zeroed for every method.

use std::ops::{Deref, DerefMut};

use ndarray::Axis;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::RawDataMatrix;
use crate::error::{invalid, Error, Result};
use crate::signal::{
    apply_delay_in_place, zero_padded, ComplexSignal, FastTimeMatrix, FftPair, SpectralSupport, SPEED_OF_LIGHT,
};

/// Occupied bins whose reference magnitude falls below this fraction of the
/// peak make plain zero forcing singular.
pub const ZF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompressionMethod {
    /// `X*(f)·X_RX(f)`.
    Matched,
    /// `X_RX(f)/X(f)`.
    ZeroForcing,
    /// `X_RX(f)/(X(f)+k)` with the real constant `k ≥ 0` added along the
    /// phase of `X`, i.e. `e^{-j∠X}/(|X|+k)`: a floor on `|X|`.
    RegularizedZf(f64),
}

/// Range-compressed data, one row per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeCompressedMatrix(pub FastTimeMatrix);

impl Deref for RangeCompressedMatrix {
    type Target = FastTimeMatrix;
    fn deref(&self) -> &FastTimeMatrix {
        &self.0
    }
}

impl DerefMut for RangeCompressedMatrix {
    fn deref_mut(&mut self) -> &mut FastTimeMatrix {
        &mut self.0
    }
}

/// Frequency-domain compression filter for one row length.
#[derive(Clone)]
pub struct CompressionFilter {
    fft: FftPair,
    response: Vec<Complex64>,
}

impl CompressionFilter {
    pub fn new(reference: &ComplexSignal, support: &SpectralSupport, n: usize, method: CompressionMethod) -> Result<Self> {
        let fft = FftPair::new(n);
        let spectrum = reference_spectrum(reference, &fft)?;
        let mask = support.mask(n, reference.sample_rate);
        if !mask.iter().any(|&m| m) {
            return Err(invalid("spectral support contains no FFT bin"));
        }
        let peak = spectrum
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(x, _)| x.norm())
            .fold(0.0, f64::max);
        let inverse_needed = match method {
            CompressionMethod::ZeroForcing => true,
            CompressionMethod::RegularizedZf(k) => {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(invalid(format!("regularization k must be finite and >= 0, got {k}")));
                }
                k == 0.0
            }
            CompressionMethod::Matched => false,
        };
        if inverse_needed {
            let floor = ZF_FLOOR * peak;
            let bins = spectrum
                .iter()
                .zip(&mask)
                .filter(|(x, &m)| m && x.norm() < floor)
                .count();
            if bins > 0 || peak == 0.0 {
                return Err(Error::SingularSpectrum { bins, floor: ZF_FLOOR });
            }
        }
        let zero = Complex64::new(0.0, 0.0);
        let response = spectrum
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| {
                if !m {
                    return zero;
                }
                match method {
                    CompressionMethod::Matched => x.conj(),
                    CompressionMethod::ZeroForcing => x.inv(),
                    CompressionMethod::RegularizedZf(k) => {
                        let a = x.norm();
                        if a == 0.0 {
                            zero
                        } else {
                            x.conj() / (a * (a + k))
                        }
                    }
                }
            })
            .collect();
        Ok(Self { fft, response })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    /// Frequency response, FFT bin order.
    pub fn response(&self) -> &[Complex64] {
        &self.response
    }

    /// Compresses one row in place.
    pub fn apply(&self, row: &mut [Complex64]) {
        self.fft.forward(row);
        for (v, h) in row.iter_mut().zip(&self.response) {
            *v *= h;
        }
        self.fft.inverse(row);
    }
}

fn reference_spectrum(reference: &ComplexSignal, fft: &FftPair) -> Result<Vec<Complex64>> {
    let mut x = zero_padded(&reference.samples, fft.len())?;
    fft.forward(&mut x);
    Ok(x)
}

/// `k` for [`CompressionMethod::RegularizedZf`] from a linear SNR:
/// the RMS reference magnitude over occupied bins divided by `√SNR`.
pub fn regularization_from_snr(reference: &ComplexSignal, support: &SpectralSupport, n: usize, snr_linear: f64) -> Result<f64> {
    if !(snr_linear > 0.0) {
        return Err(invalid(format!("snr must be positive, got {snr_linear}")));
    }
    let fft = FftPair::new(n);
    let x = reference_spectrum(reference, &fft)?;
    let mask = support.mask(n, reference.sample_rate);
    let (sum, count) = x
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v.norm_sqr(), c + 1));
    if count == 0 {
        return Err(invalid("spectral support contains no FFT bin"));
    }
    Ok((sum / count as f64 / snr_linear).sqrt())
}

/// Compresses every pulse of `rx` against `reference`.
///
/// Output column `l` is lag `l / f_s`; the fast-time origin shifts by the
/// reference's own `t0`, so a target at delay `τ` peaks at fast time `τ`.
pub fn range_compress(
    rx: &RawDataMatrix,
    reference: &ComplexSignal,
    support: &SpectralSupport,
    method: CompressionMethod,
) -> Result<RangeCompressedMatrix> {
    let n = rx.n_fast();
    if reference.len() > n {
        return Err(invalid(format!(
            "reference of {} samples is longer than the {n}-sample fast-time window",
            reference.len()
        )));
    }
    if (reference.sample_rate - rx.sample_rate).abs() > 1e-9 * rx.sample_rate {
        return Err(Error::SampleRateMismatch {
            data_hz: rx.sample_rate,
            pulse_hz: reference.sample_rate,
            factor: rx.sample_rate / reference.sample_rate,
        });
    }
    let filter = CompressionFilter::new(reference, support, n, method)?;
    let mut data = rx.data.clone();
    data.axis_iter_mut(Axis(0)).into_par_iter().for_each(|mut row| {
        let mut buf = row.to_vec();
        filter.apply(&mut buf);
        for (d, s) in row.iter_mut().zip(buf) {
            *d = s;
        }
    });
    let m = FastTimeMatrix::new(
        data,
        rx.sample_rate,
        rx.fast_time_origin - reference.t0,
        rx.slow_time.clone(),
    )?;
    Ok(RangeCompressedMatrix(m))
}

/// Unit-gain band-limited impulse at `delay_samples` on an `n`-sample
/// circular grid: the noiseless zero-forcing output for `support`.
pub fn bandlimited_impulse(support: &SpectralSupport, n: usize, sample_rate: f64, delay_samples: f64) -> Vec<Complex64> {
    let fft = FftPair::new(n);
    let mut x: Vec<Complex64> = support
        .mask(n, sample_rate)
        .into_iter()
        .map(|m| Complex64::new(if m { 1.0 } else { 0.0 }, 0.0))
        .collect();
    apply_delay_in_place(&mut x, delay_samples);
    fft.inverse(&mut x);
    x
}

/// Quality figures of a compressed point response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrfMetrics {
    /// Peak-to-maximum-sidelobe ratio, dB (≤ 0).
    pub pslr_db: f64,
    /// Integrated sidelobe ratio, dB.
    pub islr_db: f64,
    /// −3 dB mainlobe width converted to range, `c/2·Δt`, m.
    pub mainlobe_width_m: f64,
    /// Interpolated peak location, fast-time seconds.
    pub peak_position: f64,
}

fn circ_dist(a: f64, b: f64, n: usize) -> f64 {
    let d = (a - b).rem_euclid(n as f64);
    d.min(n as f64 - d)
}

fn peak_index(mags: &[f64]) -> usize {
    mags.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Parabolic refinement around the maximum: `(fractional index, magnitude)`.
fn refine_peak(mags: &[f64], i: usize) -> (f64, f64) {
    let n = mags.len();
    if n < 3 {
        return (i as f64, mags[i]);
    }
    let a = mags[(i + n - 1) % n];
    let b = mags[i];
    let c = mags[(i + 1) % n];
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return (i as f64, b);
    }
    let delta = 0.5 * (a - c) / den;
    (i as f64 + delta, b - 0.25 * (a - c) * delta)
}

/// Half-power width in samples, linear interpolation of `|y|²` walking out
/// from the peak sample (circularly).
fn half_power_width(mags: &[f64], i: usize) -> f64 {
    let n = mags.len();
    let half = mags[i] * mags[i] / 2.0;
    let walk = |step: isize| -> f64 {
        let mut prev = mags[i] * mags[i];
        for j in 1..=n / 2 {
            let idx = (i as isize + step * j as isize).rem_euclid(n as isize) as usize;
            let p = mags[idx] * mags[idx];
            if p <= half {
                return (j - 1) as f64 + (prev - half) / (prev - p);
            }
            prev = p;
        }
        (n / 2) as f64
    };
    walk(-1) + walk(1)
}

/// Measures PSLR, ISLR, −3 dB width and peak position of a compressed
/// response sampled at `sample_rate` starting at `fast_time_origin`.
///
/// The mainlobe spans the first nulls of a sinc of the occupied bandwidth,
/// `±f_s/B` samples around the interpolated peak.
pub fn irf_metrics(compressed: &[Complex64], sample_rate: f64, fast_time_origin: f64, occupied_bandwidth: f64) -> Result<IrfMetrics> {
    let n = compressed.len();
    if n == 0 {
        return Err(invalid("empty response"));
    }
    if !(occupied_bandwidth > 0.0 && sample_rate > 0.0) {
        return Err(invalid("bandwidth and sample rate must be positive"));
    }
    let mags: Vec<f64> = compressed.iter().map(|v| v.norm()).collect();
    let i = peak_index(&mags);
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    if mags[i] == 0.0 || mags[i] * mags[i] < 10.0 * median * median {
        let ratio = if median > 0.0 {
            20.0 * (mags[i] / median).log10()
        } else {
            f64::NEG_INFINITY
        };
        return Err(Error::DegenerateResponse {
            peak_over_median_db: ratio,
        });
    }
    let (pos, peak) = refine_peak(&mags, i);
    let half_width = sample_rate / occupied_bandwidth;
    let mut side_max = 0.0f64;
    let mut side_energy = 0.0;
    let mut main_energy = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        if circ_dist(j as f64, pos, n) < half_width {
            main_energy += m * m;
        } else {
            side_max = side_max.max(m);
            side_energy += m * m;
        }
    }
    let width_samples = half_power_width(&mags, i);
    Ok(IrfMetrics {
        pslr_db: 20.0 * (side_max / peak).log10(),
        islr_db: 10.0 * (side_energy / main_energy).log10(),
        mainlobe_width_m: SPEED_OF_LIGHT / 2.0 * width_samples / sample_rate,
        peak_position: fast_time_origin + pos / sample_rate,
    })
}

/// Mean sidelobe power beyond `guard_cells` resolution cells (`1/B` each)
/// from the peak, relative to the peak power, dB.
pub fn far_sidelobe_floor_db(compressed: &[Complex64], sample_rate: f64, occupied_bandwidth: f64, guard_cells: f64) -> f64 {
    let n = compressed.len();
    let mags: Vec<f64> = compressed.iter().map(|v| v.norm()).collect();
    let i = peak_index(&mags);
    let guard = guard_cells * sample_rate / occupied_bandwidth;
    let (sum, count) = mags
        .iter()
        .enumerate()
        .filter(|(j, _)| circ_dist(*j as f64, i as f64, n) > guard)
        .fold((0.0, 0usize), |(s, c), (_, m)| (s + m * m, c + 1));
    if count == 0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (sum / count as f64 / (mags[i] * mags[i])).log10()
}
