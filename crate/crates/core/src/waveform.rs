//! OFDM and chirp pulse synthesis, plus Gray-coded square-QAM bit mapping.
//!
//! OFDM symbols use a unitary DFT (`1/√M_FFT` in both directions), a
//! rectangular pulse shape over the symbol, and a DC-nulled subcarrier
//! layout: `⌊M/2⌋` subcarriers below DC, the rest above it.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::signal::{ComplexSignal, FftPair, SpectralSupport};

/// Square QAM constellation, Gray-coded independently on I and Q.
///
/// The first half of each symbol's bits selects the in-phase level, the second
/// half the quadrature level. Within an axis, bit value 0 of the leading bit
/// maps to the positive half-plane, so QPSK `00` is `(1 + j)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constellation {
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Constellation {
    pub fn order(self) -> usize {
        match self {
            Constellation::Qpsk => 4,
            Constellation::Qam16 => 16,
            Constellation::Qam64 => 64,
            Constellation::Qam256 => 256,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.order().trailing_zeros() as usize
    }

    fn levels_per_axis(self) -> usize {
        1 << (self.bits_per_symbol() / 2)
    }

    /// Scale that brings the mean symbol energy of the alphabet to 1.
    fn scale(self) -> f64 {
        let m = self.order() as f64;
        1.0 / (2.0 * (m - 1.0) / 3.0).sqrt()
    }

    /// Every constellation point, indexed by its bit label read MSB first.
    pub fn alphabet(self) -> Vec<Complex64> {
        let k = self.bits_per_symbol();
        (0..self.order())
            .map(|label| {
                let bits: Vec<bool> = (0..k).rev().map(|b| (label >> b) & 1 == 1).collect();
                self.point(&bits)
            })
            .collect()
    }

    fn point(self, bits: &[bool]) -> Complex64 {
        let half = bits.len() / 2;
        let i = axis_level(&bits[..half], self.levels_per_axis());
        let q = axis_level(&bits[half..], self.levels_per_axis());
        Complex64::new(i, q) * self.scale()
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constellation::Qpsk => "qpsk",
            Constellation::Qam16 => "qam16",
            Constellation::Qam64 => "qam64",
            Constellation::Qam256 => "qam256",
        };
        f.write_str(s)
    }
}

impl FromStr for Constellation {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "qam4" => Ok(Constellation::Qpsk),
            "qam16" | "16qam" => Ok(Constellation::Qam16),
            "qam64" | "64qam" => Ok(Constellation::Qam64),
            "qam256" | "256qam" => Ok(Constellation::Qam256),
            other => Err(invalid(format!("unknown constellation `{other}`"))),
        }
    }
}

/// Amplitude level `(L-1) - 2i` where `i` is the Gray-decoded axis index.
fn axis_level(bits: &[bool], levels: usize) -> f64 {
    let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
    let mut index = gray;
    let mut shift = gray >> 1;
    while shift != 0 {
        index ^= shift;
        shift >>= 1;
    }
    (levels as f64 - 1.0) - 2.0 * index as f64
}

fn slice_axis(x: f64, levels: usize, n_bits: usize, out: &mut Vec<bool>) {
    let top = levels as f64 - 1.0;
    let index = ((top - x) / 2.0).round().clamp(0.0, top) as usize;
    let gray = index ^ (index >> 1);
    for b in (0..n_bits).rev() {
        out.push((gray >> b) & 1 == 1);
    }
}

/// Maps bits onto constellation symbols, `log2(order)` bits per symbol.
pub fn map_bits(bits: &[bool], constellation: Constellation) -> Result<Vec<Complex64>> {
    let k = constellation.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(invalid(format!(
            "{} bits is not a multiple of {k} bits per {constellation} symbol",
            bits.len()
        )));
    }
    Ok(bits.chunks(k).map(|c| constellation.point(c)).collect())
}

/// Hard-decision demapping to the nearest constellation point.
///
/// For square QAM the Voronoi cells are axis-aligned, so independent slicing
/// of I and Q is exactly the minimum-Euclidean-distance decision.
pub fn demap_symbols(symbols: &[Complex64], constellation: Constellation) -> Vec<bool> {
    let k = constellation.bits_per_symbol();
    let levels = constellation.levels_per_axis();
    let scale = constellation.scale();
    let mut bits = Vec::with_capacity(symbols.len() * k);
    for s in symbols {
        slice_axis(s.re / scale, levels, k / 2, &mut bits);
        slice_axis(s.im / scale, levels, k / 2, &mut bits);
    }
    bits
}

/// OFDM numerology.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    /// FFT size `M_FFT`.
    pub m_fft: usize,
    /// Subcarrier spacing `Δf`, Hz.
    pub delta_f: f64,
    /// Active subcarriers `M` (DC excluded).
    pub m_active: usize,
    /// Cyclic prefix length `M_CP`, samples.
    pub cp_samples: usize,
    pub constellation: Constellation,
    /// Nominal channel bandwidth, Hz. Metadata only; resolution follows the
    /// occupied bandwidth `M·Δf`.
    pub channel_bandwidth: f64,
}

impl Default for OfdmConfig {
    /// 64-point FFT, 120 kHz spacing, 52 active subcarriers, 12-sample CP,
    /// QPSK, 40 MHz channel.
    fn default() -> Self {
        Self {
            m_fft: 64,
            delta_f: 120e3,
            m_active: 52,
            cp_samples: 12,
            constellation: Constellation::Qpsk,
            channel_bandwidth: 40e6,
        }
    }
}

impl OfdmConfig {
    /// Same numerology with the CP set to a fraction of the FFT length,
    /// rounded to whole samples (e.g. `0.0657`).
    pub fn with_cp_fraction(mut self, fraction: f64) -> Self {
        self.cp_samples = (fraction * self.m_fft as f64).round() as usize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_fft < 2 {
            return Err(invalid("m_fft must be at least 2"));
        }
        if !(self.delta_f > 0.0 && self.delta_f.is_finite()) {
            return Err(invalid("delta_f must be positive"));
        }
        if self.m_active == 0 || self.m_active >= self.m_fft {
            return Err(invalid(format!(
                "m_active must be in 1..{} (DC is nulled), got {}",
                self.m_fft, self.m_active
            )));
        }
        let (neg, pos) = self.split();
        if pos > (self.m_fft - 1) / 2 || neg > self.m_fft / 2 {
            return Err(invalid(format!(
                "{} active subcarriers do not fit around DC in a {}-point FFT",
                self.m_active, self.m_fft
            )));
        }
        Ok(())
    }

    fn split(&self) -> (usize, usize) {
        let neg = self.m_active / 2;
        (neg, self.m_active - neg)
    }

    pub fn sample_rate(&self) -> f64 {
        self.m_fft as f64 * self.delta_f
    }

    /// Useful symbol duration `T_s = 1/Δf`.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Duration of one transmitted symbol including the CP.
    pub fn symbol_duration_with_cp(&self) -> f64 {
        (self.m_fft + self.cp_samples) as f64 / self.sample_rate()
    }

    pub fn cp_fraction(&self) -> f64 {
        self.cp_samples as f64 / self.m_fft as f64
    }

    pub fn occupied_bandwidth(&self) -> f64 {
        self.m_active as f64 * self.delta_f
    }

    /// Signed subcarrier indices in symbol order.
    pub fn subcarrier_indices(&self) -> Vec<i64> {
        let (neg, pos) = self.split();
        (-(neg as i64)..0).chain(1..=pos as i64).collect()
    }

    pub fn support(&self) -> SpectralSupport {
        SpectralSupport::Subcarriers {
            spacing_hz: self.delta_f,
            indices: self.subcarrier_indices(),
        }
    }

    fn fft_bins(&self) -> Vec<usize> {
        let n = self.m_fft as i64;
        self.subcarrier_indices()
            .into_iter()
            .map(|m| m.rem_euclid(n) as usize)
            .collect()
    }
}

/// Builds the time-domain OFDM signal for `symbols`, `m_active` per OFDM
/// symbol, each prefixed by its cyclic prefix.
pub fn ofdm_modulate(symbols: &[Complex64], config: &OfdmConfig) -> Result<ComplexSignal> {
    config.validate()?;
    if symbols.is_empty() || !symbols.len().is_multiple_of(config.m_active) {
        return Err(invalid(format!(
            "{} symbols is not a positive multiple of {} active subcarriers",
            symbols.len(),
            config.m_active
        )));
    }
    let n = config.m_fft;
    let cp = config.cp_samples;
    let fft = FftPair::new(n);
    let bins = config.fft_bins();
    let gain = (n as f64).sqrt();
    let mut out = Vec::with_capacity(symbols.len() / config.m_active * (n + cp));
    let mut grid = vec![Complex64::new(0.0, 0.0); n];
    for block in symbols.chunks(config.m_active) {
        grid.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (&bin, &s) in bins.iter().zip(block) {
            grid[bin] = s;
        }
        fft.inverse(&mut grid);
        out.extend(grid[n - cp..].iter().map(|v| v * gain));
        out.extend(grid.iter().map(|v| v * gain));
    }
    ComplexSignal::new(out, config.sample_rate(), 0.0)
}

/// Inverse of [`ofdm_modulate`]: strips each CP, applies the unitary DFT and
/// returns the active-subcarrier values in symbol order.
pub fn ofdm_demodulate(samples: &[Complex64], config: &OfdmConfig) -> Result<Vec<Complex64>> {
    config.validate()?;
    let n = config.m_fft;
    let len = n + config.cp_samples;
    if !samples.len().is_multiple_of(len) {
        return Err(invalid(format!(
            "{} samples is not a multiple of the {len}-sample OFDM symbol",
            samples.len()
        )));
    }
    let fft = FftPair::new(n);
    let bins = config.fft_bins();
    let gain = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(samples.len() / len * config.m_active);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for sym in samples.chunks(len) {
        buf.copy_from_slice(&sym[config.cp_samples..]);
        fft.forward(&mut buf);
        out.extend(bins.iter().map(|&b| buf[b] * gain));
    }
    Ok(out)
}

/// Linear FM pulse parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpConfig {
    /// Swept bandwidth `B`, Hz.
    pub bandwidth: f64,
    /// Pulse length `T_p`, s.
    pub pulse_length: f64,
    pub sample_rate: f64,
}

impl ChirpConfig {
    /// Chirp rate `α = B/T_p`, Hz/s.
    pub fn rate(&self) -> f64 {
        self.bandwidth / self.pulse_length
    }

    pub fn support(&self) -> SpectralSupport {
        SpectralSupport::Band {
            low_hz: -self.bandwidth / 2.0,
            high_hz: self.bandwidth / 2.0,
        }
    }
}

/// Samples `rect(t/T_p)·exp(jπαt²)` on `[-T_p/2, T_p/2)`.
pub fn generate_chirp(config: &ChirpConfig) -> Result<ComplexSignal> {
    if !(config.bandwidth > 0.0) || !(config.pulse_length > 0.0) {
        return Err(invalid("chirp bandwidth and pulse length must be positive"));
    }
    if config.sample_rate < config.bandwidth {
        return Err(invalid(format!(
            "sample rate {} Hz is below the chirp bandwidth {} Hz",
            config.sample_rate, config.bandwidth
        )));
    }
    let n = (config.pulse_length * config.sample_rate).round() as usize;
    let t0 = -config.pulse_length / 2.0;
    let alpha = config.rate();
    let samples = (0..n)
        .map(|i| {
            let t = t0 + i as f64 / config.sample_rate;
            Complex64::from_polar(1.0, PI * alpha * t * t)
        })
        .collect();
    ComplexSignal::new(samples, config.sample_rate, t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all_labels(c: Constellation) -> Vec<bool> {
        let k = c.bits_per_symbol();
        (0..c.order())
            .flat_map(|label| (0..k).rev().map(move |b| (label >> b) & 1 == 1))
            .collect()
    }

    #[test]
    fn qpsk_zero_bits_map_to_first_quadrant() {
        let s = map_bits(&[false, false], Constellation::Qpsk).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(s[0].re, r, epsilon = 1e-15);
        assert_relative_eq!(s[0].im, r, epsilon = 1e-15);
        let s = map_bits(&[false, true], Constellation::Qpsk).unwrap();
        assert_relative_eq!(s[0].im, -r, epsilon = 1e-15);
    }

    #[test]
    fn alphabets_have_unit_energy_and_right_size() {
        for c in [
            Constellation::Qpsk,
            Constellation::Qam16,
            Constellation::Qam64,
            Constellation::Qam256,
        ] {
            let a = c.alphabet();
            assert_eq!(a.len(), c.order());
            let e: f64 = a.iter().map(|s| s.norm_sqr()).sum::<f64>() / a.len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{c}: {e}");
            // exhaustive sweep through map_bits gives the same points
            let mapped = map_bits(&all_labels(c), c).unwrap();
            assert_eq!(mapped, a);
        }
    }

    #[test]
    fn qpsk_is_constant_modulus() {
        let bits = [true, false, false, true, true, true, false, false];
        let s = map_bits(&bits, Constellation::Qpsk).unwrap();
        assert_eq!(s.len(), 4);
        for v in s {
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn nearest_neighbours_differ_in_one_bit() {
        for c in [
            Constellation::Qpsk,
            Constellation::Qam16,
            Constellation::Qam64,
            Constellation::Qam256,
        ] {
            let a = c.alphabet();
            let dmin = 2.0 * c.scale();
            for (i, p) in a.iter().enumerate() {
                for (j, q) in a.iter().enumerate() {
                    if i != j && ((p - q).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "{c}: {i:b} vs {j:b}");
                    }
                }
            }
        }
    }

    #[test]
    fn map_rejects_partial_symbols() {
        assert!(map_bits(&[true, false, true], Constellation::Qpsk).is_err());
        assert!(map_bits(&[true; 6], Constellation::Qam256).is_err());
    }

    #[test]
    fn demap_round_trips_every_alphabet() {
        for c in [
            Constellation::Qpsk,
            Constellation::Qam16,
            Constellation::Qam64,
            Constellation::Qam256,
        ] {
            let bits = all_labels(c);
            let s = map_bits(&bits, c).unwrap();
            assert_eq!(demap_symbols(&s, c), bits);
        }
    }

    #[test]
    fn demap_picks_nearest_point() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let noisy = Complex64::new(0.9 * r, 1.1 * r);
        assert_eq!(demap_symbols(&[noisy], Constellation::Qpsk), vec![false, false]);
        // far outside the grid saturates to the corner point
        let far = Complex64::new(-10.0, 10.0);
        let bits = demap_symbols(&[far], Constellation::Qam16);
        let back = map_bits(&bits, Constellation::Qam16).unwrap()[0];
        assert!(back.re < 0.0 && back.im > 0.0);
        assert_relative_eq!(back.re.abs(), 3.0 / 10f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn table_profile_symbol_length() {
        let cfg = OfdmConfig::default();
        let bits: Vec<bool> = (0..104).map(|i| i % 3 == 0).collect();
        let s = map_bits(&bits, cfg.constellation).unwrap();
        let x = ofdm_modulate(&s, &cfg).unwrap();
        assert_eq!(x.len(), 76);
        assert_relative_eq!(x.sample_rate, 7.68e6);
        assert_relative_eq!(x.duration(), 76.0 / (64.0 * 120e3), max_relative = 1e-12);
        assert_relative_eq!(cfg.occupied_bandwidth(), 6.24e6);
    }

    #[test]
    fn useful_symbol_spans_one_over_delta_f() {
        let cfg = OfdmConfig::default();
        assert_relative_eq!(cfg.m_fft as f64 / cfg.sample_rate(), cfg.symbol_duration(), max_relative = 1e-15);
        assert_relative_eq!(cfg.cp_fraction(), 0.1875);
        let short = OfdmConfig::default().with_cp_fraction(0.0657);
        assert_eq!(short.cp_samples, 4);
    }

    #[test]
    fn single_subcarrier_is_a_complex_exponential() {
        let cfg = OfdmConfig {
            m_fft: 16,
            m_active: 1,
            cp_samples: 0,
            ..OfdmConfig::default()
        };
        assert_eq!(cfg.subcarrier_indices(), vec![1]);
        let x = ofdm_modulate(&[Complex64::new(1.0, 0.0)], &cfg).unwrap();
        let fs = cfg.sample_rate();
        for (n, v) in x.samples.iter().enumerate() {
            let t = n as f64 / fs;
            let expect = Complex64::from_polar(0.25, 2.0 * PI * cfg.delta_f * t);
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn cyclic_prefix_copies_symbol_tail() {
        let cfg = OfdmConfig::default();
        let bits: Vec<bool> = (0..3 * 104).map(|i| (i * 7) % 5 < 2).collect();
        let s = map_bits(&bits, cfg.constellation).unwrap();
        let x = ofdm_modulate(&s, &cfg).unwrap();
        let len = cfg.m_fft + cfg.cp_samples;
        for sym in x.samples.chunks(len) {
            assert_eq!(&sym[..cfg.cp_samples], &sym[cfg.m_fft..]);
        }
    }

    #[test]
    fn modulate_rejects_partial_blocks() {
        let cfg = OfdmConfig::default();
        assert!(ofdm_modulate(&vec![Complex64::new(1.0, 0.0); 51], &cfg).is_err());
        assert!(ofdm_modulate(&[], &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = OfdmConfig {
            m_active: 64,
            ..OfdmConfig::default()
        };
        assert!(bad.validate().is_err());
        let ok = OfdmConfig {
            m_active: 62,
            ..OfdmConfig::default()
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn demodulate_inverts_modulate() {
        let cfg = OfdmConfig {
            constellation: Constellation::Qam64,
            ..OfdmConfig::default()
        };
        let bits: Vec<bool> = (0..2 * 52 * 6).map(|i| (i * 13) % 7 < 3).collect();
        let s = map_bits(&bits, cfg.constellation).unwrap();
        let x = ofdm_modulate(&s, &cfg).unwrap();
        let back = ofdm_demodulate(&x.samples, &cfg).unwrap();
        for (a, b) in s.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn chirp_samples() {
        let cfg = ChirpConfig {
            bandwidth: 40e6,
            pulse_length: 10e-6,
            sample_rate: 50e6,
        };
        assert_relative_eq!(cfg.rate(), 4e12);
        let x = generate_chirp(&cfg).unwrap();
        assert_eq!(x.len(), 500);
        assert_relative_eq!(x.t0, -5e-6);
        for v in &x.samples {
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn chirp_rejects_bad_parameters() {
        let mut cfg = ChirpConfig {
            bandwidth: 0.0,
            pulse_length: 10e-6,
            sample_rate: 50e6,
        };
        assert!(generate_chirp(&cfg).is_err());
        cfg.bandwidth = 40e6;
        cfg.pulse_length = -1.0;
        assert!(generate_chirp(&cfg).is_err());
        cfg.pulse_length = 1e-6;
        cfg.sample_rate = 20e6;
        assert!(generate_chirp(&cfg).is_err());
    }

    #[test]
    fn chirp_instantaneous_frequency_sweeps_band() {
        let cfg = ChirpConfig {
            bandwidth: 40e6,
            pulse_length: 10e-6,
            sample_rate: 400e6,
        };
        let x = generate_chirp(&cfg).unwrap();
        let inst = |i: usize| (x.samples[i + 1] * x.samples[i].conj()).arg() * cfg.sample_rate / (2.0 * PI);
        assert!((inst(0) + 20e6).abs() < 0.2e6);
        assert!((inst(x.len() - 2) - 20e6).abs() < 0.2e6);
    }
}
