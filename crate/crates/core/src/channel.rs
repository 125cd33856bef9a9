//! Deterministic point-scatterer channel: path delay, radar-equation
//! amplitude, two-way snow extinction and complex AWGN.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{BistaticGeometry, PointTarget, Vec3};
use crate::rng;
use crate::signal::{apply_delay_in_place, zero_padded, ComplexSignal, FastTimeMatrix, FftPair, SPEED_OF_LIGHT};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// EIRP ceiling of the targeted sub-6 GHz profiles, dBm.
pub const EIRP_LIMIT_DBM: f64 = 23.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    /// `P_TX·G_TX`, dBm.
    pub eirp_dbm: f64,
    /// Receive antenna gain, dBi.
    pub g_rx_dbi: f64,
    pub noise_figure_db: f64,
    pub carrier_frequency: f64,
    /// Receiver temperature, K.
    pub temperature: f64,
    /// One-way antenna pattern loss `f(θ)` at scene center, dB.
    pub directivity_loss_db: f64,
    /// Permits EIRP above [`EIRP_LIMIT_DBM`].
    pub allow_eirp_above_limit: bool,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            eirp_dbm: 23.0,
            g_rx_dbi: 10.0,
            noise_figure_db: 7.0,
            carrier_frequency: 5.9e9,
            temperature: 290.0,
            directivity_loss_db: 0.0,
            allow_eirp_above_limit: false,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if self.eirp_dbm > EIRP_LIMIT_DBM && !self.allow_eirp_above_limit {
            return Err(invalid(format!(
                "EIRP {} dBm exceeds the {EIRP_LIMIT_DBM} dBm limit (set the override flag to allow it)",
                self.eirp_dbm
            )));
        }
        if !(self.carrier_frequency > 0.0) || !(self.temperature > 0.0) {
            return Err(invalid("carrier frequency and temperature must be positive"));
        }
        if !self.eirp_dbm.is_finite() || !self.g_rx_dbi.is_finite() || !self.noise_figure_db.is_finite() {
            return Err(invalid("link budget terms must be finite"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn eirp_watts(&self) -> f64 {
        db_to_linear(self.eirp_dbm) * 1e-3
    }

    /// Receive aperture `A_e = G·λ²/(4π)`, m².
    pub fn effective_area(&self) -> f64 {
        db_to_linear(self.g_rx_dbi) * self.wavelength().powi(2) / (4.0 * PI)
    }

    /// Noise power spectral density `N₀ = k_B·T·F`, W/Hz.
    pub fn noise_psd(&self) -> f64 {
        BOLTZMANN * self.temperature * db_to_linear(self.noise_figure_db)
    }
}

/// Snow extinction, applied as an amplitude loss only.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SnowModel {
    /// One-way extinction γ, dB/m.
    pub extinction_db_per_m: f64,
    pub enabled: bool,
}

impl SnowModel {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn new(extinction_db_per_m: f64) -> Result<Self> {
        if !(extinction_db_per_m >= 0.0) {
            return Err(invalid(format!(
                "snow extinction must be non-negative, got {extinction_db_per_m}"
            )));
        }
        Ok(Self {
            extinction_db_per_m,
            enabled: true,
        })
    }

    pub fn one_way_loss_db(&self, depth: f64) -> f64 {
        if self.enabled {
            self.extinction_db_per_m * depth
        } else {
            0.0
        }
    }
}

/// Radar equation with separate transmit and receive ranges.
pub fn received_power_bistatic(
    budget: &LinkBudget,
    rcs: f64,
    range_tx: f64,
    range_rx: f64,
    snow: &SnowModel,
    depth: f64,
) -> Result<f64> {
    if !(range_tx > 0.0 && range_rx > 0.0) {
        return Err(invalid(format!(
            "ranges must be positive, got {range_tx} m and {range_rx} m"
        )));
    }
    let spread = 4.0 * PI * range_tx * range_tx * 4.0 * PI * range_rx * range_rx;
    let loss_db = 2.0 * snow.one_way_loss_db(depth) + 2.0 * budget.directivity_loss_db;
    Ok(budget.eirp_watts() * rcs * budget.effective_area() / spread * db_to_linear(-loss_db))
}

/// Monostatic radar equation:
/// `P_RX = EIRP·σ·A_e / ((4π)²R⁴) · 10^(−(2γd + 2L_dir)/10)`.
pub fn received_power(budget: &LinkBudget, rcs: f64, range_one_way: f64, snow: &SnowModel, depth: f64) -> Result<f64> {
    received_power_bistatic(budget, rcs, range_one_way, range_one_way, snow, depth)
}

/// `c / (2·PRF)`. `prf` must be positive.
pub fn unambiguous_range(prf: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * prf)
}

/// Raw (un-compressed) echoes, one row per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataMatrix(pub FastTimeMatrix);

impl Deref for RawDataMatrix {
    type Target = FastTimeMatrix;
    fn deref(&self) -> &FastTimeMatrix {
        &self.0
    }
}

impl DerefMut for RawDataMatrix {
    fn deref_mut(&mut self) -> &mut FastTimeMatrix {
        &mut self.0
    }
}

/// Receive window: first sample time and length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastTimeWindow {
    pub origin: f64,
    pub n_samples: usize,
}

impl FastTimeWindow {
    /// Smallest power-of-two window that holds every echo of every target
    /// over the whole trajectory, with `guard` seconds of margin each side.
    pub fn covering(geom: &BistaticGeometry, targets: &[PointTarget], waveform: &ComplexSignal, guard: f64) -> Result<Self> {
        let points: Vec<Vec3> = targets.iter().map(|t| t.position).collect();
        Self::covering_points(geom, &points, waveform, guard)
    }

    /// Same as [`FastTimeWindow::covering`] for bare scene points, e.g. the
    /// corners and edges of an image grid.
    pub fn covering_points(geom: &BistaticGeometry, points: &[Vec3], waveform: &ComplexSignal, guard: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("cannot size a window without scene points"));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in points {
            for k in 0..geom.n_pulses() {
                let d = geom.path_length(k, p) / SPEED_OF_LIGHT + waveform.t0;
                lo = lo.min(d);
                hi = hi.max(d + waveform.duration());
            }
        }
        let origin = lo - guard;
        let n = ((hi + guard - origin) * waveform.sample_rate).ceil() as usize;
        Ok(Self {
            origin,
            n_samples: n.next_power_of_two(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub budget: LinkBudget,
    pub snow: SnowModel,
    pub window: FastTimeWindow,
    pub noise: bool,
    pub seed: u64,
}

impl ChannelConfig {
    /// Complex noise variance per sample, `N₀·f_s`.
    pub fn noise_variance(&self, sample_rate: f64) -> f64 {
        self.budget.noise_psd() * sample_rate
    }
}

/// Simulates the receive window of every pulse.
///
/// The transmitted waveform is scaled to unit mean power, so each echo has
/// mean power `P_RX` over the pulse. Delays are applied as a linear phase on
/// the window FFT (sub-sample exact), the carrier contributes
/// `exp(−j2π f_c τ)`, and noise is drawn from a per-pulse stream so rows are
/// identical regardless of thread count.
pub fn simulate_echoes(
    waveform: &ComplexSignal,
    geom: &BistaticGeometry,
    targets: &[PointTarget],
    channel: &ChannelConfig,
) -> Result<RawDataMatrix> {
    channel.budget.validate()?;
    let n = channel.window.n_samples;
    let fs = waveform.sample_rate;
    let n_pulses = geom.n_pulses();
    if n_pulses == 0 {
        return Err(invalid("geometry has no pulses"));
    }
    let pulse = waveform.normalized_to_unit_power();
    let fft = FftPair::new(n);
    let mut base = zero_padded(&pulse.samples, n)?;
    fft.forward(&mut base);

    let win_start = channel.window.origin;
    let win_end = win_start + n as f64 / fs;
    let f_c = channel.budget.carrier_frequency;

    // window and amplitude checks up front so errors are deterministic
    let mut echoes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n_pulses);
    for k in 0..n_pulses {
        let mut row = Vec::with_capacity(targets.len());
        for (q, t) in targets.iter().enumerate() {
            let tau = geom.path_length(k, &t.position) / SPEED_OF_LIGHT;
            let start = tau + pulse.t0;
            if start < win_start || start + pulse.duration() > win_end + 0.5 / fs {
                return Err(Error::TargetOutsideWindow {
                    index: q,
                    delay_s: tau,
                    start_s: win_start,
                    end_s: win_end,
                });
            }
            let p = received_power_bistatic(
                &channel.budget,
                t.rcs,
                geom.tx_range(k, &t.position),
                geom.rx_range(k, &t.position),
                &channel.snow,
                t.burial_depth,
            )?;
            row.push((tau, p.sqrt()));
        }
        echoes.push(row);
    }

    let sigma = (channel.noise_variance(fs) / 2.0).sqrt();
    let mut data = Array2::<Complex64>::zeros((n_pulses, n));
    data.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(k, mut row)| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            let mut tmp = vec![Complex64::new(0.0, 0.0); n];
            for &(tau, amp) in &echoes[k] {
                tmp.copy_from_slice(&base);
                let shift = (tau + pulse.t0 - win_start) * fs;
                apply_delay_in_place(&mut tmp, shift);
                let g = Complex64::from_polar(amp, -2.0 * PI * f_c * tau);
                for (a, v) in acc.iter_mut().zip(&tmp) {
                    *a += g * v;
                }
            }
            fft.inverse(&mut acc);
            if channel.noise {
                let mut rng = rng::stream(channel.seed, "channel.noise", k as u64);
                for v in acc.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *v += Complex64::new(re * sigma, im * sigma);
                }
            }
            for (dst, src) in row.iter_mut().zip(acc) {
                *dst = src;
            }
        });

    let matrix = FastTimeMatrix::new(data, fs, win_start, geom.receiver.slow_time().to_vec())?;
    Ok(RawDataMatrix(matrix))
}
