//! File formats.
//!
//! Matrices use a small binary container: a 16-byte little-endian header
//!
//! ```text
//! offset size field
//! 0      4    magic "ISAR"
//! 4      2    version (1)
//! 6      4    n_pulses
//! 10     4    n_fast
//! 14     2    flags (bit 0: range-compressed)
//! ```
//!
//! followed by `n_pulses × n_fast` complex samples, row-major, each as two
//! `f32` (I then Q). Axis metadata goes in a `key=value` sidecar next to the
//! data file, named `<file>.meta`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;

use crate::analysis::SweepRow;
use crate::error::{invalid, Error, Result};
use crate::focusing::SarImage;
use crate::signal::FastTimeMatrix;

pub const MAGIC: &[u8; 4] = b"ISAR";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
const FLAG_RANGE_COMPRESSED: u16 = 1;

/// Matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredMatrix {
    pub matrix: FastTimeMatrix,
    pub range_compressed: bool,
    /// Trajectory CSV named in the sidecar, resolved against the data file's
    /// directory.
    pub trajectory: Option<PathBuf>,
}

/// `<path>.meta`
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn encode_header(n_pulses: usize, n_fast: usize, range_compressed: bool) -> Result<[u8; HEADER_LEN]> {
    let np = u32::try_from(n_pulses).map_err(|_| invalid("too many pulses for the container"))?;
    let nf = u32::try_from(n_fast).map_err(|_| invalid("too many samples for the container"))?;
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(MAGIC);
    h[4..6].copy_from_slice(&VERSION.to_le_bytes());
    h[6..10].copy_from_slice(&np.to_le_bytes());
    h[10..14].copy_from_slice(&nf.to_le_bytes());
    let flags = if range_compressed { FLAG_RANGE_COMPRESSED } else { 0 };
    h[14..16].copy_from_slice(&flags.to_le_bytes());
    Ok(h)
}

/// Writes the data file and its sidecar. `trajectory` is recorded verbatim
/// in the sidecar.
pub fn write_matrix(path: &Path, m: &FastTimeMatrix, range_compressed: bool, trajectory: Option<&str>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_header(m.n_pulses(), m.n_fast(), range_compressed)?)?;
    for v in m.data.iter() {
        w.write_all(&(v.re as f32).to_le_bytes())?;
        w.write_all(&(v.im as f32).to_le_bytes())?;
    }
    w.flush()?;

    let mut meta = String::new();
    meta.push_str(&format!("sample_rate={}\n", m.sample_rate));
    meta.push_str(&format!("fast_time_origin={}\n", m.fast_time_origin));
    let st: Vec<String> = m.slow_time.iter().map(|t| t.to_string()).collect();
    meta.push_str(&format!("slow_time={}\n", st.join(",")));
    if let Some(t) = trajectory {
        meta.push_str(&format!("trajectory={t}\n"));
    }
    std::fs::write(meta_path(path), meta)?;
    Ok(())
}

/// Parses `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Format(format!("`{key}` is not a number: `{v}`")))
}

pub fn read_matrix(path: &Path) -> Result<StoredMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut h = [0u8; HEADER_LEN];
    r.read_exact(&mut h)
        .map_err(|_| Error::Format(format!("{}: shorter than the header", path.display())))?;
    if &h[0..4] != MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    let version = u16::from_le_bytes([h[4], h[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("{}: unsupported version {version}", path.display())));
    }
    let n_pulses = u32::from_le_bytes(h[6..10].try_into().expect("4 bytes")) as usize;
    let n_fast = u32::from_le_bytes(h[10..14].try_into().expect("4 bytes")) as usize;
    let flags = u16::from_le_bytes([h[14], h[15]]);

    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let want = n_pulses * n_fast * 8;
    if body.len() != want {
        return Err(Error::Format(format!(
            "{}: expected {want} payload bytes, found {}",
            path.display(),
            body.len()
        )));
    }
    let values: Vec<Complex64> = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().expect("4 bytes"));
            let im = f32::from_le_bytes(c[4..8].try_into().expect("4 bytes"));
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    let data = Array2::from_shape_vec((n_pulses, n_fast), values).map_err(|e| Error::Format(e.to_string()))?;

    let mp = meta_path(path);
    let text = std::fs::read_to_string(&mp)
        .map_err(|e| Error::Format(format!("{}: {e}", mp.display())))?;
    let mut sample_rate = None;
    let mut origin = None;
    let mut slow_time = None;
    let mut trajectory = None;
    for (k, v) in parse_key_values(&text)? {
        match k.as_str() {
            "sample_rate" => sample_rate = Some(parse_f64(&k, &v)?),
            "fast_time_origin" => origin = Some(parse_f64(&k, &v)?),
            "slow_time" => {
                let t: Result<Vec<f64>> = v
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_f64(&k, s))
                    .collect();
                slow_time = Some(t?);
            }
            "trajectory" => {
                let base = path.parent().unwrap_or(Path::new("."));
                trajectory = Some(base.join(v));
            }
            other => {
                return Err(Error::Format(format!("{}: unknown key `{other}`", mp.display())));
            }
        }
    }
    let missing = |k: &str| Error::Format(format!("{}: missing `{k}`", mp.display()));
    let slow_time = slow_time.unwrap_or_else(|| (0..n_pulses).map(|k| k as f64).collect());
    let matrix = FastTimeMatrix::new(
        data,
        sample_rate.ok_or_else(|| missing("sample_rate"))?,
        origin.ok_or_else(|| missing("fast_time_origin"))?,
        slow_time,
    )?;
    Ok(StoredMatrix {
        matrix,
        range_compressed: flags & FLAG_RANGE_COMPRESSED != 0,
        trajectory,
    })
}

/// Reads an I/Q dump: one complex sample per line as `i,q` (an optional
/// `i,q` header line is skipped), pulses back to back with `n_fast` samples
/// each. Slow time defaults to the pulse index.
pub fn read_iq_csv(path: &Path, n_fast: usize, sample_rate: f64, fast_time_origin: f64) -> Result<FastTimeMatrix> {
    if n_fast == 0 {
        return Err(invalid("n_fast must be positive"));
    }
    let mut values = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.eq_ignore_ascii_case("i,q")) {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("line {}: expected `i,q`", i + 1)))?;
        values.push(Complex64::new(
            parse_f64("i", a.trim())?,
            parse_f64("q", b.trim())?,
        ));
    }
    if values.is_empty() || values.len() % n_fast != 0 {
        return Err(Error::Format(format!(
            "{} samples is not a positive multiple of n_fast = {n_fast}",
            values.len()
        )));
    }
    let n_pulses = values.len() / n_fast;
    let data = Array2::from_shape_vec((n_pulses, n_fast), values).map_err(|e| Error::Format(e.to_string()))?;
    FastTimeMatrix::new(data, sample_rate, fast_time_origin, (0..n_pulses).map(|k| k as f64).collect())
}

/// 16-bit binary PGM of `20·log10|F|`, clipped to `dynamic_range_db` below
/// the peak. Image rows run from the largest `y` (top) down; columns are `x`.
pub fn write_image_pgm(path: &Path, image: &SarImage, dynamic_range_db: f64) -> Result<()> {
    if !(dynamic_range_db > 0.0) {
        return Err(invalid("dynamic range must be positive"));
    }
    let (nx, ny) = image.pixels.dim();
    let db: Vec<f64> = image.pixels.iter().map(|v| 20.0 * v.norm().log10()).collect();
    let peak = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{nx} {ny}\n65535\n")?;
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            let v = db[ix * ny + iy];
            let level = if peak.is_finite() {
                ((v - peak + dynamic_range_db) / dynamic_range_db).clamp(0.0, 1.0)
            } else {
                0.0
            };
            w.write_all(&((level * 65535.0).round() as u16).to_be_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV `x,y,re,im`, one line per pixel, `x` outer.
pub fn write_image_csv(path: &Path, image: &SarImage) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "re", "im"])?;
    for ((ix, iy), v) in image.pixels.indexed_iter() {
        let p = image.grid.pixel(ix, iy);
        w.write_record([p.x.to_string(), p.y.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Grid and wavelength of an exported image, `key=value`.
pub fn write_image_meta(path: &Path, image: &SarImage, out_of_window_pixels: usize) -> Result<()> {
    let g = &image.grid;
    let text = format!(
        "grid.origin_x={}\ngrid.origin_y={}\ngrid.origin_z={}\ngrid.nx={}\ngrid.ny={}\ngrid.dx={}\ngrid.dy={}\nwavelength={}\nout_of_window_pixels={}\n",
        g.origin.x, g.origin.y, g.origin.z, g.nx, g.ny, g.dx, g.dy, image.wavelength, out_of_window_pixels
    );
    std::fs::write(path, text)?;
    Ok(())
}

/// CSV `variable,value,nesz_db,ber,ber_ci_low,ber_ci_high`; the BER columns
/// stay empty for NESZ-only rows.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variable", "value", "nesz_db", "ber", "ber_ci_low", "ber_ci_high"])?;
    for r in rows {
        let (ber, lo, hi) = match &r.ber {
            Some(b) => (b.ber.to_string(), b.ci_low.to_string(), b.ci_high.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([r.variable.to_string(), r.value.to_string(), r.nesz_db.to_string(), ber, lo, hi])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `time_s,re,im,mag_db` of a compressed row.
pub fn write_irf_csv(path: &Path, samples: &[Complex64], sample_rate: f64, fast_time_origin: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time_s", "re", "im", "mag_db"])?;
    for (i, v) in samples.iter().enumerate() {
        let t = fast_time_origin + i as f64 / sample_rate;
        w.write_record([
            t.to_string(),
            v.re.to_string(),
            v.im.to_string(),
            (20.0 * v.norm().log10()).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
