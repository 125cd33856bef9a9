use std::fs;
use std::path::{Path, PathBuf};

use isac_core::analysis::{ber_sweep, nesz_sweep, ofdm_awgn_ber, q_function};
use isac_core::channel::{simulate_echoes, unambiguous_range, ChannelConfig, FastTimeWindow, RawDataMatrix};
use isac_core::compression::{range_compress, regularization_from_snr, CompressionMethod, RangeCompressedMatrix};
use isac_core::emulation::{adapt_prf, emulate_ofdm_from_chirp};
use isac_core::focusing::{image_snr, tdbp_focus_with, tdbp_reference, FocusOutput};
use isac_core::geometry::{BistaticGeometry, SceneGrid, Trajectory};
use isac_core::io::{
    read_matrix, write_image_csv, write_image_meta, write_image_pgm, write_irf_csv, write_matrix, write_sweep_csv,
};
use isac_core::scenario::{irf_experiment, Acquisition, IrfRun};
use isac_core::signal::{ComplexSignal, FastTimeMatrix, SpectralSupport};
use isac_core::waveform::{generate_chirp, Constellation, OfdmConfig};
use ndarray::Array2;
use rayon::prelude::*;

use crate::config::{parse_constellation, parse_method, Config};
use crate::error::{CliError, Result};

/// Where a command writes, plus the input files it read (for the manifest).
pub struct Run<'a> {
    pub cfg: &'a Config,
    pub out: &'a Path,
    pub inputs: Vec<(String, PathBuf)>,
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Relative input paths are taken from the output directory.
    fn input(&mut self, key: &str) -> Result<PathBuf> {
        let v = self.cfg.str(key)?.to_string();
        let p = Path::new(&v);
        let full = if p.is_absolute() { p.to_path_buf() } else { self.out.join(p) };
        if !full.is_file() {
            return Err(CliError::io(&full, std::io::Error::new(std::io::ErrorKind::NotFound, format!("input for `{key}` not found"))));
        }
        self.inputs.push((v, full.clone()));
        Ok(full)
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn resolve_method(method: CompressionMethod, cfg: &Config, reference: &ComplexSignal, support: &SpectralSupport, n: usize) -> Result<CompressionMethod> {
    match method {
        CompressionMethod::RegularizedZf(k) if k.is_nan() => {
            let snr = 10f64.powf(cfg.f64("compression.rzf_snr_db")? / 10.0);
            Ok(CompressionMethod::RegularizedZf(regularization_from_snr(reference, support, n, snr)?))
        }
        m => Ok(m),
    }
}

fn method_name(m: &CompressionMethod) -> &'static str {
    match m {
        CompressionMethod::Matched => "matched",
        CompressionMethod::ZeroForcing => "zf",
        CompressionMethod::RegularizedZf(_) => "rzf",
    }
}

pub fn irf(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let draws = cfg.usize("irf.draws")?.max(1);
    let seed = cfg.seed()?;
    let constellations: Vec<Constellation> = cfg
        .list("irf.constellations")?
        .iter()
        .map(|s| parse_constellation("irf.constellations", s))
        .collect::<Result<_>>()?;
    let k = cfg.opt_f64("compression.rzf_k")?;
    let methods: Vec<CompressionMethod> = cfg
        .list("irf.methods")?
        .iter()
        .map(|s| parse_method("irf.methods", s, k))
        .collect::<Result<_>>()?;

    let mut table = Vec::new();
    println!("{:<8} {:<8} {:>9} {:>9} {:>10} {:>11} {:>11}", "const", "method", "pslr_db", "islr_db", "width_m", "floor_db", "resid_db");
    for &c in &constellations {
        let profile = cfg.irf_profile(c)?;
        for m in &methods {
            let m = match m {
                CompressionMethod::RegularizedZf(k) if k.is_nan() => {
                    let pulse = isac_core::scenario::random_ofdm_symbol(&profile, seed, "irf.bits")?;
                    resolve_method(*m, cfg, &pulse, &profile.support(), pulse.len())?
                }
                other => *other,
            };
            let runs: Vec<IrfRun> = (0..draws as u64)
                .into_par_iter()
                .map(|d| irf_experiment(&profile, m, seed.wrapping_add(d)))
                .collect::<isac_core::Result<_>>()?;
            let first = &runs[0];
            write_irf_csv(
                &run.path(&format!("irf_{c}_{}.csv", method_name(&m))),
                &first.compressed,
                profile.sample_rate(),
                first.origin,
            )?;
            let n = runs.len() as f64;
            let pslr = runs.iter().map(|r| r.metrics.pslr_db).sum::<f64>() / n;
            let islr = runs.iter().map(|r| r.metrics.islr_db).sum::<f64>() / n;
            let width = runs.iter().map(|r| r.metrics.mainlobe_width_m).sum::<f64>() / n;
            let floor = 10.0 * (runs.iter().map(|r| 10f64.powf(r.far_floor_db / 10.0)).sum::<f64>() / n).log10();
            let resid = runs.iter().map(|r| r.residual_db).fold(f64::NEG_INFINITY, f64::max);
            println!("{:<8} {:<8} {pslr:>9.2} {islr:>9.2} {width:>10.3} {floor:>11.2} {resid:>11.2}", c.to_string(), method_name(&m));
            table.push(vec![
                c.to_string(),
                method_name(&m).to_string(),
                pslr.to_string(),
                islr.to_string(),
                width.to_string(),
                floor.to_string(),
                resid.to_string(),
            ]);
        }
    }
    write_csv(
        &run.path("irf_metrics.csv"),
        &["constellation", "method", "pslr_db", "islr_db", "mainlobe_width_m", "far_floor_db", "residual_db"],
        &table,
    )
}

fn pulse_matrix(p: &ComplexSignal) -> Result<FastTimeMatrix> {
    let data = Array2::from_shape_vec((1, p.len()), p.samples.clone()).expect("one row");
    Ok(FastTimeMatrix::new(data, p.sample_rate, p.t0, vec![0.0])?)
}

fn write_trajectory(run: &Run, traj: &Trajectory) -> Result<()> {
    Ok(traj.write_csv(run.path("trajectory.csv"))?)
}

pub fn simulate(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let acq = cfg.acquisition()?;
    let grid = cfg.grid(&acq)?;
    let geometry = acq.geometry()?;
    let ofdm_pulse = acq.pulse()?.normalized_to_unit_power();
    write_trajectory(run, &geometry.receiver)?;
    write_matrix(&run.path("pulse.isar"), &pulse_matrix(&ofdm_pulse)?, false, None)?;

    match cfg.str("simulate.waveform")? {
        "ofdm" => {
            let sim = acq.simulate(&grid)?;
            write_matrix(&run.path("raw.isar"), &sim.raw, false, Some("trajectory.csv"))?;
            println!(
                "simulated {} pulses x {} samples; predicted focused SNR {:.2} dB",
                sim.raw.n_pulses(),
                sim.raw.n_fast(),
                10.0 * acq.predicted_snr(&acq.targets[0])?.log10()
            );
        }
        "chirp" => {
            let chirp = generate_chirp(&cfg.chirp()?)?.normalized_to_unit_power();
            // room for the chirp's early start and for the longer OFDM echo
            // once the data is emulated
            let wc = acq.window(&geometry, &grid, &chirp)?;
            let wo = acq.window(&geometry, &grid, &ofdm_pulse)?;
            let window = FastTimeWindow {
                origin: wc.origin.min(wo.origin),
                n_samples: 2 * wc.n_samples.max(wo.n_samples),
            };
            let channel = ChannelConfig {
                budget: acq.budget.clone(),
                snow: acq.snow,
                window,
                noise: acq.noise,
                seed: acq.seed,
            };
            let raw = simulate_echoes(&chirp, &geometry, &acq.targets, &channel)?;
            let rc = range_compress(&raw, &chirp, &cfg.chirp()?.support(), CompressionMethod::Matched)?;
            write_matrix(&run.path("chirp_rc.isar"), &rc, true, Some("trajectory.csv"))?;
            println!("simulated {} chirp pulses x {} samples (range-compressed)", rc.n_pulses(), rc.n_fast());
        }
        other => return Err(CliError::bad("simulate.waveform", format!("expected ofdm or chirp, got `{other}`"))),
    }
    Ok(())
}

fn geometry_for(cfg: &Config, traj: Trajectory) -> Result<BistaticGeometry> {
    Ok(match cfg.transmitter()? {
        Some(tx) => BistaticGeometry::bistatic(tx, traj),
        None => BistaticGeometry::monostatic(traj),
    })
}

fn export_image(run: &Run, out: &FocusOutput, acq: &Acquisition, grid: &SceneGrid) -> Result<()> {
    let cfg = run.cfg;
    write_image_pgm(&run.path("image.pgm"), &out.image, cfg.f64("focus.dynamic_range_db")?)?;
    write_image_csv(&run.path("image.csv"), &out.image)?;
    write_image_meta(&run.path("image.meta"), &out.image, out.out_of_window_pixels)?;
    let (ix, iy, v) = out.image.peak();
    let p = grid.pixel(ix, iy);
    let radius = match cfg.opt_f64("focus.exclusion_radius_m")? {
        Some(r) => r,
        None => 1.5 * grid.dx.max(grid.dy),
    };
    let target = acq.targets[0].position;
    let snr = if grid.contains(&target) {
        image_snr(&out.image, &target, radius).map(|s| s.to_string()).unwrap_or_default()
    } else {
        String::new()
    };
    println!(
        "peak at ({:.3}, {:.3}) m, {:.2} dB; image SNR {} dB; {} pixel(s) outside the window",
        p.x,
        p.y,
        20.0 * v.norm().log10(),
        if snr.is_empty() { "n/a" } else { &snr },
        out.out_of_window_pixels
    );
    write_csv(
        &run.path("focus_metrics.csv"),
        &["peak_x_m", "peak_y_m", "peak_db", "image_snr_db", "out_of_window_pixels"],
        &[vec![
            p.x.to_string(),
            p.y.to_string(),
            (20.0 * v.norm().log10()).to_string(),
            snr,
            out.out_of_window_pixels.to_string(),
        ]],
    )
}

fn load_pulse(run: &mut Run) -> Result<ComplexSignal> {
    let stored = read_matrix(&run.input("focus.pulse")?)?;
    let m = stored.matrix;
    Ok(ComplexSignal::new(m.data.row(0).to_vec(), m.sample_rate, m.fast_time_origin)?)
}

fn compress_and_focus(
    run: &Run,
    raw: &RawDataMatrix,
    pulse: &ComplexSignal,
    support: &SpectralSupport,
    geometry: &BistaticGeometry,
    acq: &Acquisition,
) -> Result<()> {
    let cfg = run.cfg;
    let grid = cfg.grid(acq)?;
    let method = resolve_method(cfg.compression()?, cfg, pulse, support, raw.n_fast())?;
    let rc = range_compress(raw, pulse, support, method)?;
    focus_compressed(run, &rc, geometry, acq, &grid)
}

fn focus_compressed(run: &Run, rc: &RangeCompressedMatrix, geometry: &BistaticGeometry, acq: &Acquisition, grid: &SceneGrid) -> Result<()> {
    let out = tdbp_focus_with(rc, geometry, grid, acq.budget.carrier_frequency, run.cfg.interpolator()?)?;
    export_image(run, &out, acq, grid)
}

pub fn focus(run: &mut Run) -> Result<()> {
    let acq = run.cfg.acquisition()?;
    let stored = read_matrix(&run.input("focus.input")?)?;
    let traj_path = stored
        .trajectory
        .clone()
        .ok_or_else(|| CliError::Core(isac_core::Error::Format("input sidecar names no trajectory".into())))?;
    run.inputs.push((traj_path.display().to_string(), traj_path.clone()));
    let geometry = geometry_for(run.cfg, Trajectory::read_csv(&traj_path)?)?;
    if stored.range_compressed {
        let grid = run.cfg.grid(&acq)?;
        return focus_compressed(run, &RangeCompressedMatrix(stored.matrix), &geometry, &acq, &grid);
    }
    let pulse = load_pulse(run)?;
    compress_and_focus(run, &RawDataMatrix(stored.matrix), &pulse, &acq.ofdm.support(), &geometry, &acq)
}

pub fn emulate(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let acq = cfg.acquisition()?;
    let stored = read_matrix(&run.input("emulate.input")?)?;
    if !stored.range_compressed {
        return Err(CliError::bad("emulate.input", "expects range-compressed chirp data"));
    }
    let traj_path = stored
        .trajectory
        .clone()
        .ok_or_else(|| CliError::Core(isac_core::Error::Format("input sidecar names no trajectory".into())))?;
    run.inputs.push((traj_path.display().to_string(), traj_path.clone()));
    let mut traj = Trajectory::read_csv(&traj_path)?;
    let mut rc = RangeCompressedMatrix(stored.matrix);
    if let Some(prf) = cfg.opt_f64("emulate.target_prf_hz")? {
        let (r, t) = adapt_prf(&rc, &traj, prf)?;
        rc = r;
        traj = t;
    }
    let pulse = acq.pulse()?.normalized_to_unit_power();
    let raw = emulate_ofdm_from_chirp(&rc, &pulse)?;
    write_trajectory(run, &traj)?;
    write_matrix(&run.path("pulse.isar"), &pulse_matrix(&pulse)?, false, None)?;
    write_matrix(&run.path("emulated_raw.isar"), &raw, false, Some("trajectory.csv"))?;
    println!("emulated {} OFDM pulses x {} samples", raw.n_pulses(), raw.n_fast());
    let geometry = geometry_for(cfg, traj)?;
    compress_and_focus(run, &raw, &pulse, &acq.ofdm.support(), &geometry, &acq)
}

fn sweep_common(run: &Run, with_ber: bool) -> Result<()> {
    let spec = run.cfg.sweep()?;
    let rows = if with_ber {
        ber_sweep(&spec, run.cfg.parse("ber.n_bits")?, run.cfg.seed()?)?
    } else {
        nesz_sweep(&spec)?
    };
    for r in &rows {
        match &r.ber {
            Some(b) => println!("{} = {:>8.3}  NESZ {:>8.3} dB  BER {:.3e} [{:.3e}, {:.3e}]", r.variable.name(), r.value, r.nesz_db, b.ber, b.ci_low, b.ci_high),
            None => println!("{} = {:>8.3}  NESZ {:>8.3} dB", r.variable.name(), r.value, r.nesz_db),
        }
    }
    Ok(write_sweep_csv(&run.path("sweep.csv"), &rows)?)
}

pub fn nesz_sweep_cmd(run: &mut Run) -> Result<()> {
    sweep_common(run, false)
}

pub fn ber_sweep_cmd(run: &mut Run) -> Result<()> {
    sweep_common(run, true)
}

struct Check {
    name: &'static str,
    value: f64,
    pass: bool,
}

pub fn selftest(run: &mut Run) -> Result<()> {
    let seed = run.cfg.seed()?;
    let mut checks = Vec::new();

    let r = unambiguous_range(125e3);
    checks.push(Check { name: "unambiguous_range_m", value: r, pass: (r - 1199.17).abs() < 0.01 });

    let qpsk = isac_core::scenario::wideband_irf_profile(Constellation::Qpsk);
    let mf = irf_experiment(&qpsk, CompressionMethod::Matched, seed)?;
    checks.push(Check { name: "qpsk_matched_pslr_db", value: mf.metrics.pslr_db, pass: (mf.metrics.pslr_db + 13.26).abs() <= 1.0 });
    let zf = irf_experiment(&qpsk, CompressionMethod::ZeroForcing, seed)?;
    checks.push(Check { name: "zf_residual_db", value: zf.residual_db, pass: zf.residual_db <= -40.0 });

    let acq = Acquisition {
        ofdm: OfdmConfig { m_fft: 256, cp_samples: 48, ..OfdmConfig::default() },
        n_pulses: 32,
        seed,
        ..Acquisition::default()
    };
    let grid = acq.grid(12, 12, 1.0, 4.0)?;
    let sim = acq.simulate(&grid)?;
    let rc = sim.compress(&acq.ofdm, CompressionMethod::Matched)?;
    let f = acq.budget.carrier_frequency;
    let fast = tdbp_focus_with(&rc, &sim.geometry, &grid, f, Default::default())?;
    let slow = tdbp_reference(&rc, &sim.geometry, &grid, f)?;
    let peak = slow.image.pixels.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = fast
        .image
        .pixels
        .iter()
        .zip(slow.image.pixels.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / peak;
    checks.push(Check { name: "tdbp_oracle_rel_error", value: err, pass: err <= 1e-3 });

    let ebn0 = 10f64.powf(0.6);
    let ber = ofdm_awgn_ber(&OfdmConfig::default(), 2.0 * ebn0, 200_000, seed)?;
    let theory = q_function((2.0 * ebn0).sqrt());
    checks.push(Check { name: "qpsk_ber_6db", value: ber.ber, pass: ber.ci_low <= theory && theory <= ber.ci_high });

    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.to_string(), c.value.to_string(), c.pass.to_string()])
        .collect();
    for c in &checks {
        println!("{:<24} {:>14.6e}  {}", c.name, c.value, if c.pass { "PASS" } else { "FAIL" });
    }
    write_csv(&run.path("selftest.csv"), &["check", "value", "pass"], &rows)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelfTest(failed.join(", ")))
    }
}
