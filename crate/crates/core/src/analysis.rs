//! Link-budget KPIs: the SNR chain, NESZ, resolutions, Monte-Carlo BER and
//! the sweep engines that tabulate them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channel::{db_to_linear, linear_to_db, received_power, LinkBudget, SnowModel};
use crate::error::{invalid, Result};
use crate::rng;
use crate::signal::SPEED_OF_LIGHT;
use crate::waveform::{demap_symbols, map_bits, ofdm_demodulate, ofdm_modulate, OfdmConfig};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseMode {
    SymbolBased,
    FrameBased(usize),
}

/// Equivalent radar pulse carved out of the OFDM stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseDefinition {
    pub mode: PulseMode,
    /// Pulse length, s.
    pub t_p: f64,
    /// Pulse repetition frequency, Hz.
    pub prf: f64,
}

impl Default for PulseDefinition {
    /// One 8 µs symbol per pulse at 125 kHz.
    fn default() -> Self {
        Self::symbol_based(8e-6).expect("positive duration")
    }
}

impl PulseDefinition {
    /// One symbol per pulse, back to back: `prf = 1/t_symbol`.
    pub fn symbol_based(t_symbol: f64) -> Result<Self> {
        if !(t_symbol > 0.0 && t_symbol.is_finite()) {
            return Err(invalid(format!("symbol duration must be positive, got {t_symbol}")));
        }
        Ok(Self {
            mode: PulseMode::SymbolBased,
            t_p: t_symbol,
            prf: 1.0 / t_symbol,
        })
    }

    /// Symbol-based pulse whose length is one OFDM symbol including its CP.
    pub fn from_ofdm(config: &OfdmConfig) -> Result<Self> {
        config.validate()?;
        Self::symbol_based(config.symbol_duration_with_cp())
    }

    /// Groups `n_symbols` consecutive symbols into one pulse. Only valid on a
    /// symbol-based definition.
    pub fn frame_based(&self, n_symbols: usize) -> Result<Self> {
        if self.mode != PulseMode::SymbolBased {
            return Err(invalid("frame-based pulses are built from a symbol-based definition"));
        }
        if n_symbols == 0 {
            return Err(invalid("a frame needs at least one symbol"));
        }
        let n = n_symbols as f64;
        Ok(Self {
            mode: PulseMode::FrameBased(n_symbols),
            t_p: self.t_p * n,
            prf: self.prf / n,
        })
    }

    pub fn duty_cycle(&self) -> f64 {
        self.t_p * self.prf
    }
}

/// Platform altitude over the target plane and look angle from nadir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewingGeometry {
    pub altitude: f64,
    pub off_nadir_deg: f64,
}

impl ViewingGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.altitude > 0.0) {
            return Err(invalid(format!("altitude must be positive, got {}", self.altitude)));
        }
        if !(0.0..90.0).contains(&self.off_nadir_deg) {
            return Err(invalid(format!(
                "off-nadir angle must be in [0, 90) degrees, got {}",
                self.off_nadir_deg
            )));
        }
        Ok(())
    }

    pub fn slant_range(&self) -> f64 {
        self.altitude / self.off_nadir_deg.to_radians().cos()
    }

    pub fn ground_range(&self) -> f64 {
        self.altitude * self.off_nadir_deg.to_radians().tan()
    }
}

/// `P_RX·T_p/N₀`.
pub fn snr_range_compressed(p_rx: f64, t_p: f64, n0: f64) -> f64 {
    p_rx * t_p / n0
}

/// `SNR_RC·N_τ`.
pub fn snr_focused(snr_rc: f64, n_tau: usize) -> f64 {
    snr_rc * n_tau as f64
}

/// Slant-range and azimuth resolution:
/// `ρ_rg = c/(2B)`, `ρ_az = λR/(2L)`.
pub fn resolutions(occupied_bandwidth: f64, wavelength: f64, aperture_length: f64, range: f64) -> Result<(f64, f64)> {
    for (name, v) in [
        ("occupied bandwidth", occupied_bandwidth),
        ("wavelength", wavelength),
        ("aperture length", aperture_length),
        ("range", range),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok((
        SPEED_OF_LIGHT / (2.0 * occupied_bandwidth),
        wavelength * range / (2.0 * aperture_length),
    ))
}

/// NESZ in dB: the inverse focused SNR of a target with `σ₀ = 1`, i.e.
/// `σ = ρ_rg·ρ_az`, seen monostatically at the slant range of `geometry`.
pub fn nesz(
    budget: &LinkBudget,
    geometry: &ViewingGeometry,
    pulse: &PulseDefinition,
    n_tau: usize,
    resolutions: (f64, f64),
    snow: &SnowModel,
    depth: f64,
) -> Result<f64> {
    budget.validate()?;
    geometry.validate()?;
    let (rg, az) = resolutions;
    if !(rg > 0.0 && az > 0.0) {
        return Err(invalid(format!("resolutions must be positive, got ({rg}, {az})")));
    }
    if n_tau == 0 {
        return Err(invalid("n_tau must be at least 1"));
    }
    let p = received_power(budget, rg * az, geometry.slant_range(), snow, depth)?;
    let snr = snr_focused(snr_range_compressed(p, pulse.t_p, budget.noise_psd()), n_tau);
    Ok(-linear_to_db(snr))
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let d = 1.0 + z2 / n;
    let c = (p + z2 / (2.0 * n)) / d;
    let h = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / d;
    // the bounds touch 0 and 1 exactly at the extremes; avoid round-off there
    let lo = if k == 0 { 0.0 } else { (c - h).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (c + h).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BerEstimate {
    pub fn from_counts(errors: u64, bits: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, bits, Z_95);
        Self {
            errors,
            bits,
            ber: if bits == 0 { 0.0 } else { errors as f64 / bits as f64 },
            ci_low,
            ci_high,
        }
    }
}

const BER_CHUNK_SYMBOLS: usize = 256;

/// Monte-Carlo BER of the OFDM chain over AWGN at a per-subcarrier
/// `Es/N₀` (linear), with perfect channel knowledge at the receiver.
///
/// Bits are processed in fixed chunks of OFDM symbols, each with its own
/// random stream, so the result does not depend on the thread count. Passing
/// `f64::INFINITY` gives the noiseless chain.
pub fn ofdm_awgn_ber(config: &OfdmConfig, es_n0: f64, n_bits: u64, seed: u64) -> Result<BerEstimate> {
    config.validate()?;
    if n_bits == 0 {
        return Err(invalid("BER needs at least one bit"));
    }
    if !(es_n0 >= 0.0) {
        return Err(invalid(format!("Es/N0 must be non-negative, got {es_n0}")));
    }
    let bits_per_ofdm = config.m_active * config.constellation.bits_per_symbol();
    let chunk_bits = (BER_CHUNK_SYMBOLS * bits_per_ofdm) as u64;
    let n_chunks = n_bits.div_ceil(chunk_bits);
    // unitary DFT: per-sample time-domain variance equals per-bin variance
    let sigma = if es_n0.is_infinite() { 0.0 } else { (0.5 / es_n0).sqrt() };

    let errors: Result<Vec<u64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, "analysis.ber", c);
            let used = (n_bits - c * chunk_bits).min(chunk_bits) as usize;
            let bits: Vec<bool> = (0..chunk_bits as usize).map(|_| rng.random()).collect();
            let symbols = map_bits(&bits, config.constellation)?;
            let mut tx = ofdm_modulate(&symbols, config)?.samples;
            if sigma > 0.0 {
                for v in tx.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *v += Complex64::new(re, im) * sigma;
                }
            }
            let rx = ofdm_demodulate(&tx, config)?;
            let decided = demap_symbols(&rx, config.constellation);
            Ok(bits[..used]
                .iter()
                .zip(&decided[..used])
                .filter(|(a, b)| a != b)
                .count() as u64)
        })
        .collect();
    Ok(BerEstimate::from_counts(errors?.iter().sum(), n_bits))
}

/// One-way Friis power at a receiver `range` away, through `depth` of snow:
/// `EIRP·G_rx·λ²/(4πR)²·10^(−(γd + L_dir)/10)`.
pub fn comm_received_power(budget: &LinkBudget, range: f64, snow: &SnowModel, depth: f64) -> Result<f64> {
    budget.validate()?;
    if !(range > 0.0) {
        return Err(invalid(format!("range must be positive, got {range}")));
    }
    let lambda = budget.wavelength();
    let spread = (4.0 * PI * range / lambda).powi(2);
    let loss_db = snow.one_way_loss_db(depth) + budget.directivity_loss_db;
    Ok(budget.eirp_watts() * db_to_linear(budget.g_rx_dbi) / spread * db_to_linear(-loss_db))
}

/// Per-subcarrier `Es/N₀ = P_rx/(N₀·B_occ)`.
pub fn comm_es_n0(p_rx: f64, budget: &LinkBudget, config: &OfdmConfig) -> f64 {
    p_rx / (budget.noise_psd() * config.occupied_bandwidth())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Eirp,
    Altitude,
    SnowDepth,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::Eirp => "eirp_dbm",
            Self::Altitude => "altitude_m",
            Self::SnowDepth => "snow_depth_m",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eirp" | "eirp_dbm" => Ok(Self::Eirp),
            "altitude" | "altitude_m" => Ok(Self::Altitude),
            "snow_depth" | "snow_depth_m" => Ok(Self::SnowDepth),
            other => Err(invalid(format!(
                "unknown sweep variable `{other}` (expected eirp, altitude or snow_depth)"
            ))),
        }
    }
}

/// Fixed parameters around a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub budget: LinkBudget,
    pub snow: SnowModel,
    pub snow_depth: f64,
    pub viewing: ViewingGeometry,
    pub pulse: PulseDefinition,
    pub n_tau: usize,
    pub ofdm: OfdmConfig,
    /// Angle subtended by the synthetic aperture at the target, degrees.
    /// Holding it fixed keeps `ρ_az` independent of altitude.
    pub integration_angle_deg: f64,
}

impl Scenario {
    pub fn resolutions(&self) -> Result<(f64, f64)> {
        let range = self.viewing.slant_range();
        let aperture = range * self.integration_angle_deg.to_radians();
        resolutions(self.ofdm.occupied_bandwidth(), self.budget.wavelength(), aperture, range)
    }

    pub fn nesz_db(&self) -> Result<f64> {
        nesz(
            &self.budget,
            &self.viewing,
            &self.pulse,
            self.n_tau,
            self.resolutions()?,
            &self.snow,
            self.snow_depth,
        )
    }

    /// Per-subcarrier `Es/N₀` of the downlink to a receiver at the target.
    pub fn comm_es_n0(&self) -> Result<f64> {
        let p = comm_received_power(&self.budget, self.viewing.slant_range(), &self.snow, self.snow_depth)?;
        Ok(comm_es_n0(p, &self.budget, &self.ofdm))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiSweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub scenario: Scenario,
}

impl KpiSweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("sweep step must be positive, got {}", self.step)));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.stop >= self.start) {
            return Err(invalid(format!(
                "sweep range [{}, {}] is empty",
                self.start, self.stop
            )));
        }
        if self.variable == SweepVariable::SnowDepth && !self.scenario.snow.enabled {
            return Err(invalid("a snow-depth sweep needs a snow extinction coefficient"));
        }
        Ok(())
    }

    /// `start, start+step, …` up to `stop` inclusive (with a tolerance of
    /// 1e−9 steps for round-off).
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }

    pub fn scenario_at(&self, value: f64) -> Scenario {
        let mut s = self.scenario.clone();
        match self.variable {
            SweepVariable::Eirp => s.budget.eirp_dbm = value,
            SweepVariable::Altitude => s.viewing.altitude = value,
            SweepVariable::SnowDepth => s.snow_depth = value,
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub nesz_db: f64,
    pub ber: Option<BerEstimate>,
}

pub fn nesz_sweep(spec: &KpiSweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.values()
        .into_iter()
        .map(|v| {
            Ok(SweepRow {
                variable: spec.variable,
                value: v,
                nesz_db: spec.scenario_at(v).nesz_db()?,
                ber: None,
            })
        })
        .collect()
}

/// NESZ and measured BER at every sweep value.
///
/// Every point reuses the same seed, so the bits and the unit-variance noise
/// are common to all points and only the noise scale changes. This makes the
/// measured BER of a Gray-coded QPSK link exactly monotone in `Es/N₀`.
pub fn ber_sweep(spec: &KpiSweepSpec, n_bits: u64, seed: u64) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    if n_bits == 0 {
        return Err(invalid("BER sweep needs at least one bit per point"));
    }
    spec.values()
        .into_par_iter()
        .map(|v| {
            let s = spec.scenario_at(v);
            Ok(SweepRow {
                variable: spec.variable,
                value: v,
                nesz_db: s.nesz_db()?,
                ber: Some(ofdm_awgn_ber(&s.ofdm, s.comm_es_n0()?, n_bits, seed)?),
            })
        })
        .collect()
}
