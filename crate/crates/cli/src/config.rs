//! Scenario configuration.
//!
//! The format is one `key = value` pair per line with dotted namespaces.
//! Blank lines and lines starting with `#` are ignored; whitespace around
//! keys and values is trimmed; a later assignment to the same key wins.
//! Every key must appear in [`KEYS`]. Vectors are written `x,y,z` and lists
//! as comma-separated words.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use isac_core::analysis::{KpiSweepSpec, PulseDefinition, Scenario, SweepVariable, ViewingGeometry};
use isac_core::channel::{LinkBudget, SnowModel};
use isac_core::compression::CompressionMethod;
use isac_core::focusing::Interpolator;
use isac_core::geometry::{PointTarget, SceneGrid, Vec3};
use isac_core::scenario::Acquisition;
use isac_core::waveform::{Constellation, OfdmConfig};

use crate::error::{CliError, Result};

/// Known keys with their defaults; `None` marks keys that have no default.
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("seed", Some("0")),
    ("ofdm.m_fft", Some("64")),
    ("ofdm.delta_f_hz", Some("120000")),
    ("ofdm.m_active", Some("52")),
    ("ofdm.cp_samples", Some("12")),
    ("ofdm.constellation", Some("qpsk")),
    ("ofdm.channel_bandwidth_hz", Some("40000000")),
    ("link.eirp_dbm", Some("23")),
    ("link.g_rx_dbi", Some("10")),
    ("link.noise_figure_db", Some("7")),
    ("link.carrier_hz", Some("5900000000")),
    ("link.temperature_k", Some("290")),
    ("link.directivity_loss_db", Some("0")),
    ("link.allow_eirp_above_limit", Some("false")),
    ("snow.extinction_db_per_m", None),
    ("snow.depth_m", Some("0")),
    ("platform.altitude_m", Some("150")),
    ("platform.off_nadir_deg", Some("45")),
    ("platform.speed_mps", Some("2.5")),
    ("platform.prf_hz", Some("250")),
    ("platform.n_pulses", Some("256")),
    ("transmitter.position", Some("colocated")),
    ("target.position", Some("0,0,0")),
    ("target.rcs_m2", Some("1")),
    ("simulate.noise", Some("true")),
    ("simulate.waveform", Some("ofdm")),
    ("chirp.bandwidth_hz", Some("6000000")),
    ("chirp.pulse_length_s", Some("0.000004")),
    ("compression.method", Some("matched")),
    ("compression.rzf_k", Some("auto")),
    ("compression.rzf_snr_db", Some("20")),
    ("grid.nx", Some("101")),
    ("grid.ny", Some("7")),
    ("grid.dx_m", Some("auto")),
    ("grid.dy_m", Some("auto")),
    ("focus.input", Some("raw.isar")),
    ("focus.pulse", Some("pulse.isar")),
    ("focus.interpolator", Some("sinc")),
    ("focus.dynamic_range_db", Some("40")),
    ("focus.exclusion_radius_m", Some("auto")),
    ("irf.m_fft", Some("4096")),
    ("irf.m_active", Some("1024")),
    ("irf.delta_f_hz", Some("15000")),
    ("irf.cp_samples", Some("0")),
    ("irf.constellations", Some("qpsk,qam256")),
    ("irf.methods", Some("matched,zf")),
    ("irf.draws", Some("100")),
    ("sweep.variable", Some("eirp")),
    ("sweep.start", Some("0")),
    ("sweep.stop", Some("23")),
    ("sweep.step", Some("1")),
    ("sweep.n_tau", Some("1000")),
    ("sweep.integration_angle_deg", Some("4")),
    ("sweep.symbol_duration_s", Some("0.000008")),
    ("sweep.frame_symbols", Some("1")),
    ("ber.n_bits", Some("100000")),
    ("emulate.input", Some("chirp_rc.isar")),
    ("emulate.target_prf_hz", Some("none")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl Default for Config {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v.to_string())))
            .collect();
        Self { values }
    }
}

fn parse_lines(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::ConfigSyntax {
            path: path.to_path_buf(),
            message: format!("line {}: expected `key = value`, got `{line}`", i + 1),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Config {
    /// Defaults, then the file (if any), then `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut pairs = Vec::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            pairs.extend(parse_lines(&text, p)?);
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| CliError::ConfigSyntax {
                path: "--set".into(),
                message: format!("expected key=value, got `{o}`"),
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut unknown: Vec<String> = pairs.iter().filter(|(k, _)| !known(k)).map(|(k, _)| k.clone()).collect();
        if !unknown.is_empty() {
            unknown.sort();
            unknown.dedup();
            return Err(CliError::UnknownKeys(unknown));
        }
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.values.insert(k, v);
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(known(key), "{key}");
        self.values.insert(key.to_string(), value.into());
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.values.get(key).map(String::as_str).ok_or_else(|| CliError::MissingKey {
            key: key.to_string(),
            reason: "but has no value".to_string(),
        })
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.str(key)?;
        v.parse::<T>().map_err(|e| CliError::bad(key, format!("cannot parse `{v}`: {e}")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parse(key)?;
        if !v.is_finite() {
            return Err(CliError::bad(key, "must be finite"));
        }
        Ok(v)
    }

    /// `None` when the value is `auto` (or `none`).
    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.str(key)? {
            "auto" | "none" => Ok(None),
            _ => self.f64(key).map(Some),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parse(key)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.parse(key)
    }

    pub fn vec3(&self, key: &str) -> Result<Vec3> {
        let v = self.str(key)?;
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::bad(key, format!("expected `x,y,z`, got `{v}`")));
        }
        let mut xyz = [0.0; 3];
        for (dst, s) in xyz.iter_mut().zip(parts) {
            *dst = s.parse().map_err(|_| CliError::bad(key, format!("`{s}` is not a number")))?;
        }
        Ok(Vec3::new(xyz[0], xyz[1], xyz[2]))
    }

    pub fn list(&self, key: &str) -> Result<Vec<String>> {
        Ok(self
            .str(key)?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect())
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("seed")
    }

    pub fn ofdm(&self) -> Result<OfdmConfig> {
        let c = OfdmConfig {
            m_fft: self.usize("ofdm.m_fft")?,
            delta_f: self.f64("ofdm.delta_f_hz")?,
            m_active: self.usize("ofdm.m_active")?,
            cp_samples: self.usize("ofdm.cp_samples")?,
            constellation: parse_constellation("ofdm.constellation", self.str("ofdm.constellation")?)?,
            channel_bandwidth: self.f64("ofdm.channel_bandwidth_hz")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn irf_profile(&self, constellation: Constellation) -> Result<OfdmConfig> {
        let c = OfdmConfig {
            m_fft: self.usize("irf.m_fft")?,
            delta_f: self.f64("irf.delta_f_hz")?,
            m_active: self.usize("irf.m_active")?,
            cp_samples: self.usize("irf.cp_samples")?,
            constellation,
            channel_bandwidth: self.f64("ofdm.channel_bandwidth_hz")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn budget(&self) -> Result<LinkBudget> {
        let b = LinkBudget {
            eirp_dbm: self.f64("link.eirp_dbm")?,
            g_rx_dbi: self.f64("link.g_rx_dbi")?,
            noise_figure_db: self.f64("link.noise_figure_db")?,
            carrier_frequency: self.f64("link.carrier_hz")?,
            temperature: self.f64("link.temperature_k")?,
            directivity_loss_db: self.f64("link.directivity_loss_db")?,
            allow_eirp_above_limit: self.bool("link.allow_eirp_above_limit")?,
        };
        if b.eirp_dbm > isac_core::channel::EIRP_LIMIT_DBM && !b.allow_eirp_above_limit {
            return Err(CliError::bad(
                "link.eirp_dbm",
                format!(
                    "{} dBm is above the {} dBm limit; set link.allow_eirp_above_limit = true to allow it",
                    b.eirp_dbm,
                    isac_core::channel::EIRP_LIMIT_DBM
                ),
            ));
        }
        b.validate()?;
        Ok(b)
    }

    /// Snow model; the extinction coefficient has no default and must be
    /// given whenever `needed` (buried targets, snow-depth sweeps).
    pub fn snow(&self, needed: bool, why: &str) -> Result<SnowModel> {
        const KEY: &str = "snow.extinction_db_per_m";
        if self.has(KEY) {
            let g = self.f64(KEY)?;
            return Ok(SnowModel::new(g)?);
        }
        if needed {
            return Err(CliError::MissingKey {
                key: KEY.to_string(),
                reason: why.to_string(),
            });
        }
        Ok(SnowModel::disabled())
    }

    fn snow_depth(&self) -> Result<f64> {
        let d = self.f64("snow.depth_m")?;
        if d < 0.0 {
            return Err(CliError::bad("snow.depth_m", "must be non-negative"));
        }
        Ok(d)
    }

    pub fn transmitter(&self) -> Result<Option<Vec3>> {
        match self.str("transmitter.position")? {
            "colocated" | "monostatic" => Ok(None),
            _ => self.vec3("transmitter.position").map(Some),
        }
    }

    pub fn acquisition(&self) -> Result<Acquisition> {
        let depth = self.snow_depth()?;
        let snow = self.snow(depth > 0.0, "because snow.depth_m > 0 buries the target")?;
        let target = PointTarget::new(self.vec3("target.position")?, self.f64("target.rcs_m2")?, depth)?;
        let a = Acquisition {
            ofdm: self.ofdm()?,
            budget: self.budget()?,
            snow,
            altitude: self.f64("platform.altitude_m")?,
            off_nadir_deg: self.f64("platform.off_nadir_deg")?,
            speed: self.f64("platform.speed_mps")?,
            prf: self.f64("platform.prf_hz")?,
            n_pulses: self.usize("platform.n_pulses")?,
            transmitter: self.transmitter()?,
            targets: vec![target],
            noise: self.bool("simulate.noise")?,
            seed: self.seed()?,
        };
        a.validate()?;
        Ok(a)
    }

    /// Grid centred on the origin; `auto` spacings follow the azimuth and
    /// ground-range resolution of `acq`.
    pub fn grid(&self, acq: &Acquisition) -> Result<SceneGrid> {
        let dx = match self.opt_f64("grid.dx_m")? {
            Some(v) => v,
            None => acq.resolutions()?.1,
        };
        let dy = match self.opt_f64("grid.dy_m")? {
            Some(v) => v,
            None => acq.ground_range_resolution()?,
        };
        Ok(acq.grid(self.usize("grid.nx")?, self.usize("grid.ny")?, dx, dy)?)
    }

    /// Chirp sampled at the OFDM sample rate, so that its compressed data
    /// can be fed straight into emulation.
    pub fn chirp(&self) -> Result<isac_core::waveform::ChirpConfig> {
        Ok(isac_core::waveform::ChirpConfig {
            bandwidth: self.f64("chirp.bandwidth_hz")?,
            pulse_length: self.f64("chirp.pulse_length_s")?,
            sample_rate: self.ofdm()?.sample_rate(),
        })
    }

    pub fn compression(&self) -> Result<CompressionMethod> {
        parse_method("compression.method", self.str("compression.method")?, self.opt_f64("compression.rzf_k")?)
    }

    pub fn interpolator(&self) -> Result<Interpolator> {
        match self.str("focus.interpolator")? {
            "sinc" => Ok(Interpolator::WindowedSinc),
            "nearest" => Ok(Interpolator::Nearest),
            other => Err(CliError::bad(
                "focus.interpolator",
                format!("expected sinc or nearest, got `{other}`"),
            )),
        }
    }

    pub fn sweep(&self) -> Result<KpiSweepSpec> {
        let variable: SweepVariable = self
            .str("sweep.variable")?
            .parse()
            .map_err(|e: isac_core::Error| CliError::bad("sweep.variable", e.to_string()))?;
        let depth = self.snow_depth()?;
        let snow = self.snow(
            variable == SweepVariable::SnowDepth || depth > 0.0,
            "for snow-depth sweeps and scenarios with snow.depth_m > 0",
        )?;
        let budget = self.budget()?;
        let symbol = PulseDefinition::symbol_based(self.f64("sweep.symbol_duration_s")?)?;
        let frames = self.usize("sweep.frame_symbols")?;
        let pulse = if frames <= 1 { symbol } else { symbol.frame_based(frames)? };
        let spec = KpiSweepSpec {
            variable,
            start: self.f64("sweep.start")?,
            stop: self.f64("sweep.stop")?,
            step: self.f64("sweep.step")?,
            scenario: Scenario {
                budget,
                snow,
                snow_depth: depth,
                viewing: ViewingGeometry {
                    altitude: self.f64("platform.altitude_m")?,
                    off_nadir_deg: self.f64("platform.off_nadir_deg")?,
                },
                pulse,
                n_tau: self.usize("sweep.n_tau")?,
                ofdm: self.ofdm()?,
                integration_angle_deg: self.f64("sweep.integration_angle_deg")?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Text that [`Config::load`] reads back to the same configuration.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn parse_constellation(key: &str, s: &str) -> Result<Constellation> {
    s.parse::<Constellation>()
        .map_err(|e| CliError::bad(key, e.to_string()))
}

pub fn parse_method(key: &str, s: &str, k: Option<f64>) -> Result<CompressionMethod> {
    match s {
        "matched" | "mf" => Ok(CompressionMethod::Matched),
        "zf" => Ok(CompressionMethod::ZeroForcing),
        // resolved against the reference spectrum later when k is auto
        "rzf" => Ok(CompressionMethod::RegularizedZf(k.unwrap_or(f64::NAN))),
        other => Err(CliError::bad(key, format!("expected matched, zf or rzf, got `{other}`"))),
    }
}
