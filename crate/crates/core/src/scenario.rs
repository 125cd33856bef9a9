//! Ready-made experiments shared by the command-line runner and the tests.
//!
//! [`Acquisition`] is a straight, level flight along +x looking sideways at
//! scene points near the ground origin; the platform track sits at
//! `y = −altitude·tan(off-nadir)`, so a target at the origin is seen at the
//! requested off-nadir angle from mid-aperture.
//! [`irf_experiment`] compresses a single noiseless OFDM symbol against
//! itself to expose the range sidelobes of a given constellation and filter.

use num_complex::Complex64;
use rand::Rng;

use crate::analysis::{resolutions, snr_focused, snr_range_compressed};
use crate::channel::{
    received_power_bistatic, simulate_echoes, ChannelConfig, FastTimeWindow, LinkBudget, RawDataMatrix, SnowModel,
};
use crate::compression::{
    bandlimited_impulse, far_sidelobe_floor_db, irf_metrics, range_compress, CompressionMethod, IrfMetrics,
    RangeCompressedMatrix,
};
use crate::error::{invalid, Result};
use crate::focusing::{tdbp_focus_with, FocusOutput, Interpolator};
use crate::geometry::{make_linear_trajectory, BistaticGeometry, PointTarget, SceneGrid, Trajectory, Vec3};
use crate::rng;
use crate::signal::{ComplexSignal, FastTimeMatrix};
use crate::waveform::{map_bits, ofdm_modulate, OfdmConfig};

/// One OFDM symbol (with CP) carrying uniformly random bits drawn from
/// `rng::stream(seed, label, 0)`.
pub fn random_ofdm_symbol(config: &OfdmConfig, seed: u64, label: &str) -> Result<ComplexSignal> {
    config.validate()?;
    let mut r = rng::stream(seed, label, 0);
    let n_bits = config.m_active * config.constellation.bits_per_symbol();
    let bits: Vec<bool> = (0..n_bits).map(|_| r.random()).collect();
    ofdm_modulate(&map_bits(&bits, config.constellation)?, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub ofdm: OfdmConfig,
    pub budget: LinkBudget,
    pub snow: SnowModel,
    pub altitude: f64,
    pub off_nadir_deg: f64,
    /// Platform ground speed, m/s.
    pub speed: f64,
    pub prf: f64,
    pub n_pulses: usize,
    /// Fixed transmitter position; `None` for monostatic operation.
    pub transmitter: Option<Vec3>,
    pub targets: Vec<PointTarget>,
    pub noise: bool,
    pub seed: u64,
}

impl Default for Acquisition {
    /// 150 m altitude, 45° off-nadir, 2.5 m/s, 250 Hz PRF, 256 pulses, one
    /// 1 m² target at the origin, noise on.
    fn default() -> Self {
        Self {
            ofdm: OfdmConfig::default(),
            budget: LinkBudget::default(),
            snow: SnowModel::disabled(),
            altitude: 150.0,
            off_nadir_deg: 45.0,
            speed: 2.5,
            prf: 250.0,
            n_pulses: 256,
            transmitter: None,
            targets: vec![PointTarget::new(Vec3::zeros(), 1.0, 0.0).expect("valid target")],
            noise: true,
            seed: 0,
        }
    }
}

impl Acquisition {
    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.budget.validate()?;
        if !(self.altitude > 0.0) {
            return Err(invalid("altitude must be positive"));
        }
        if !(0.0..90.0).contains(&self.off_nadir_deg) {
            return Err(invalid("off-nadir angle must be in [0, 90) degrees"));
        }
        if !(self.speed >= 0.0 && self.prf > 0.0) {
            return Err(invalid("speed must be non-negative and PRF positive"));
        }
        if self.n_pulses == 0 {
            return Err(invalid("at least one pulse is required"));
        }
        if self.targets.is_empty() {
            return Err(invalid("at least one target is required"));
        }
        Ok(())
    }

    pub fn track_offset(&self) -> f64 {
        self.altitude * self.off_nadir_deg.to_radians().tan()
    }

    pub fn aperture_length(&self) -> f64 {
        self.speed * (self.n_pulses.saturating_sub(1)) as f64 / self.prf
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let start = Vec3::new(-0.5 * self.aperture_length(), -self.track_offset(), self.altitude);
        make_linear_trajectory(start, Vec3::new(self.speed, 0.0, 0.0), self.prf, self.n_pulses)
    }

    pub fn geometry(&self) -> Result<BistaticGeometry> {
        let traj = self.trajectory()?;
        Ok(match self.transmitter {
            Some(tx) => BistaticGeometry::bistatic(tx, traj),
            None => BistaticGeometry::monostatic(traj),
        })
    }

    pub fn pulse(&self) -> Result<ComplexSignal> {
        random_ofdm_symbol(&self.ofdm, self.seed, "waveform.bits")
    }

    /// Slant range from mid-aperture to the ground origin.
    pub fn slant_range(&self) -> f64 {
        self.altitude / self.off_nadir_deg.to_radians().cos()
    }

    /// `(ρ_rg, ρ_az)`: slant-range and azimuth resolution.
    pub fn resolutions(&self) -> Result<(f64, f64)> {
        resolutions(
            self.ofdm.occupied_bandwidth(),
            self.budget.wavelength(),
            self.aperture_length().max(f64::MIN_POSITIVE),
            self.slant_range(),
        )
    }

    /// Range resolution projected on flat ground.
    pub fn ground_range_resolution(&self) -> Result<f64> {
        Ok(self.resolutions()?.0 / self.off_nadir_deg.to_radians().sin())
    }

    /// Predicted focused SNR `(P_RX·T_p/N₀)·N_τ` of `target`, with `P_RX`
    /// taken at mid-aperture and `T_p` the transmitted pulse length.
    pub fn predicted_snr(&self, target: &PointTarget) -> Result<f64> {
        let geom = self.geometry()?;
        let mid = self.n_pulses / 2;
        let p = received_power_bistatic(
            &self.budget,
            target.rcs,
            geom.tx_range(mid, &target.position),
            geom.rx_range(mid, &target.position),
            &self.snow,
            target.burial_depth,
        )?;
        let t_p = self.pulse()?.duration();
        Ok(snr_focused(snr_range_compressed(p, t_p, self.budget.noise_psd()), self.n_pulses))
    }

    /// Ground grid centred on the origin with pixel `(nx/2, ny/2)` at it.
    pub fn grid(&self, nx: usize, ny: usize, dx: f64, dy: f64) -> Result<SceneGrid> {
        SceneGrid::centered(Vec3::zeros(), nx, ny, dx, dy)
    }

    /// Receive window holding every echo and every pixel delay of `grid`.
    pub fn window(&self, geom: &BistaticGeometry, grid: &SceneGrid, pulse: &ComplexSignal) -> Result<FastTimeWindow> {
        let mut points: Vec<Vec3> = self.targets.iter().map(|t| t.position).collect();
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                points.push(grid.pixel(ix, iy));
            }
        }
        // the compressed pulse spreads a few samples either side
        FastTimeWindow::covering_points(geom, &points, pulse, 16.0 / pulse.sample_rate)
    }

    /// Echo simulation with the acquisition's own seed.
    pub fn simulate(&self, grid: &SceneGrid) -> Result<SimulatedAcquisition> {
        self.simulate_with_noise_seed(grid, self.seed)
    }

    /// Echo simulation with the pulse fixed by `self.seed` and the noise by
    /// `noise_seed`.
    pub fn simulate_with_noise_seed(&self, grid: &SceneGrid, noise_seed: u64) -> Result<SimulatedAcquisition> {
        self.validate()?;
        let geometry = self.geometry()?;
        let pulse = self.pulse()?.normalized_to_unit_power();
        let window = self.window(&geometry, grid, &pulse)?;
        let channel = ChannelConfig {
            budget: self.budget.clone(),
            snow: self.snow,
            window,
            noise: self.noise,
            seed: noise_seed,
        };
        let raw = simulate_echoes(&pulse, &geometry, &self.targets, &channel)?;
        Ok(SimulatedAcquisition { raw, pulse, geometry })
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedAcquisition {
    pub raw: RawDataMatrix,
    /// Transmitted pulse, unit mean power.
    pub pulse: ComplexSignal,
    pub geometry: BistaticGeometry,
}

impl SimulatedAcquisition {
    pub fn compress(&self, config: &OfdmConfig, method: CompressionMethod) -> Result<RangeCompressedMatrix> {
        range_compress(&self.raw, &self.pulse, &config.support(), method)
    }

    pub fn focus(
        &self,
        config: &OfdmConfig,
        method: CompressionMethod,
        grid: &SceneGrid,
        carrier_frequency: f64,
    ) -> Result<FocusOutput> {
        let rc = self.compress(config, method)?;
        tdbp_focus_with(&rc, &self.geometry, grid, carrier_frequency, Interpolator::WindowedSinc)
    }
}

/// Outcome of [`irf_experiment`].
#[derive(Debug, Clone)]
pub struct IrfRun {
    pub compressed: Vec<Complex64>,
    /// Fast time of `compressed[0]`.
    pub origin: f64,
    pub metrics: IrfMetrics,
    /// Mean sidelobe power beyond 10 resolution cells, dB re peak.
    pub far_floor_db: f64,
    /// Largest deviation from the ideal band-limited impulse after a
    /// least-squares complex gain fit, dB re peak.
    pub residual_db: f64,
}

/// Compresses one noiseless OFDM symbol of random data, placed at zero delay
/// in an `m_fft + cp`-sample window, against itself.
pub fn irf_experiment(config: &OfdmConfig, method: CompressionMethod, seed: u64) -> Result<IrfRun> {
    let pulse = random_ofdm_symbol(config, seed, "irf.bits")?;
    let fs = pulse.sample_rate;
    let n = pulse.len();
    let data = ndarray::Array2::from_shape_vec((1, n), pulse.samples.clone()).map_err(|e| invalid(e.to_string()))?;
    let raw = RawDataMatrix(FastTimeMatrix::new(data, fs, 0.0, vec![0.0])?);
    let support = config.support();
    let rc = range_compress(&raw, &pulse, &support, method)?;
    let compressed: Vec<Complex64> = rc.data.row(0).to_vec();
    let b = config.occupied_bandwidth();
    let metrics = irf_metrics(&compressed, fs, rc.fast_time_origin, b)?;
    let far_floor_db = far_sidelobe_floor_db(&compressed, fs, b, 10.0);

    let ideal = bandlimited_impulse(&support, n, fs, 0.0);
    let num: Complex64 = ideal.iter().zip(&compressed).map(|(h, y)| h.conj() * y).sum();
    let den: f64 = ideal.iter().map(|h| h.norm_sqr()).sum();
    let gain = num / den;
    let peak = compressed.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let dev = ideal
        .iter()
        .zip(&compressed)
        .map(|(h, y)| (y - gain * h).norm())
        .fold(0.0, f64::max);
    Ok(IrfRun {
        compressed,
        origin: rc.fast_time_origin,
        metrics,
        far_floor_db,
        residual_db: 20.0 * (dev / peak).log10(),
    })
}

/// The wide-band single-symbol profile used for sidelobe studies: 1024
/// active subcarriers in a 4096-point FFT, no cyclic prefix.
pub fn wideband_irf_profile(constellation: crate::waveform::Constellation) -> OfdmConfig {
    OfdmConfig {
        m_fft: 4096,
        delta_f: 15e3,
        m_active: 1024,
        cp_samples: 0,
        constellation,
        channel_bandwidth: 20e6,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::Constellation;

    #[test]
    fn mid_aperture_geometry() {
        let a = Acquisition::default();
        let t = a.trajectory().unwrap();
        let mid = (t.positions()[127] + t.positions()[128]) / 2.0;
        assert!((mid - Vec3::new(0.0, -150.0, 150.0)).norm() < 1e-9);
        assert!((a.slant_range() - 150.0 * 2f64.sqrt()).abs() < 1e-9);
        assert!((a.aperture_length() - 2.55).abs() < 1e-12);
    }

    #[test]
    fn irf_profile_sidelobes() {
        let run = irf_experiment(&wideband_irf_profile(Constellation::Qpsk), CompressionMethod::Matched, 1).unwrap();
        assert!((run.metrics.pslr_db + 13.26).abs() < 1.0, "{}", run.metrics.pslr_db);
        let zf = irf_experiment(&wideband_irf_profile(Constellation::Qam256), CompressionMethod::ZeroForcing, 1).unwrap();
        assert!(zf.residual_db < -40.0);
    }
}
