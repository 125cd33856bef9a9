//! Time-domain back-projection.
//!
//! Every pixel accumulates, over pulses in ascending order,
//! `w_k · x_RC,k(L_k/c) · exp(+j2π f_c L_k / c)` where `L_k` is the total
//! transmitter → pixel → receiver path at pulse `k` (twice the one-way range
//! when monostatic) and `w_k` the slow-time weight of the trajectory. The
//! fast-time sample is read with an 8-tap Kaiser-windowed sinc (β = 6).
//!
//! [`tdbp_focus`] is the production path: pixel-parallel, tabulated kernel.
//! [`tdbp_reference`] evaluates the same sum serially with the kernel computed
//! exactly per tap and is used as the oracle for the fast path.

use std::f64::consts::PI;
use std::sync::OnceLock;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::compression::RangeCompressedMatrix;
use crate::error::{invalid, Result};
use crate::geometry::{BistaticGeometry, SceneGrid, Transmitter, Vec3};
use crate::signal::SPEED_OF_LIGHT;

pub const KERNEL_TAPS: usize = 8;
pub const KAISER_BETA: f64 = 6.0;
const HALF_TAPS: f64 = (KERNEL_TAPS / 2) as f64;
const LUT_STEPS_PER_SAMPLE: usize = 1024;

/// Fast-time interpolator used by back-projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolator {
    #[default]
    WindowedSinc,
    Nearest,
}

/// Focused complex image, `pixels[(ix, iy)]` at `grid.pixel(ix, iy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SarImage {
    pub pixels: Array2<Complex64>,
    pub grid: SceneGrid,
    pub wavelength: f64,
}

impl SarImage {
    /// Location and value of the brightest pixel.
    pub fn peak(&self) -> (usize, usize, Complex64) {
        let mut best = (0, 0, Complex64::new(0.0, 0.0));
        for ((ix, iy), v) in self.pixels.indexed_iter() {
            if v.norm_sqr() > best.2.norm_sqr() {
                best = (ix, iy, *v);
            }
        }
        best
    }

    /// Magnitudes along x (azimuth) at row `iy`.
    pub fn azimuth_cut(&self, iy: usize) -> Vec<f64> {
        self.pixels.column(iy).iter().map(|v| v.norm()).collect()
    }

    /// Magnitudes along y (ground range) at column `ix`.
    pub fn range_cut(&self, ix: usize) -> Vec<f64> {
        self.pixels.row(ix).iter().map(|v| v.norm()).collect()
    }
}

/// Image plus the number of pixels zeroed because some pulse's delay fell
/// outside the fast-time window.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusOutput {
    pub image: SarImage,
    pub out_of_window_pixels: usize,
}

fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser-windowed sinc evaluated directly.
pub fn kaiser_sinc(d: f64) -> f64 {
    if d.abs() >= HALF_TAPS {
        return 0.0;
    }
    let s = if d == 0.0 { 1.0 } else { (PI * d).sin() / (PI * d) };
    let r = d / HALF_TAPS;
    s * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA)
}

fn kernel_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = KERNEL_TAPS * LUT_STEPS_PER_SAMPLE;
        (0..=n + 1)
            .map(|i| kaiser_sinc(i as f64 / LUT_STEPS_PER_SAMPLE as f64 - HALF_TAPS))
            .collect()
    })
}

#[inline]
fn kernel_lookup(table: &[f64], d: f64) -> f64 {
    let x = (d + HALF_TAPS) * LUT_STEPS_PER_SAMPLE as f64;
    if x <= 0.0 || x >= (KERNEL_TAPS * LUT_STEPS_PER_SAMPLE) as f64 {
        return 0.0;
    }
    let i = x as usize;
    let f = x - i as f64;
    table[i] + f * (table[i + 1] - table[i])
}

fn check_inputs(rc: &RangeCompressedMatrix, geom: &BistaticGeometry, carrier_frequency: f64) -> Result<()> {
    if rc.n_pulses() != geom.n_pulses() {
        return Err(invalid(format!(
            "{} range-compressed rows for {} trajectory pulses",
            rc.n_pulses(),
            geom.n_pulses()
        )));
    }
    if !(carrier_frequency > 0.0) {
        return Err(invalid("carrier frequency must be positive"));
    }
    Ok(())
}

/// Pixel-parallel back-projection with the default windowed-sinc kernel.
pub fn tdbp_focus(rc: &RangeCompressedMatrix, geom: &BistaticGeometry, grid: &SceneGrid, carrier_frequency: f64) -> Result<FocusOutput> {
    tdbp_focus_with(rc, geom, grid, carrier_frequency, Interpolator::WindowedSinc)
}

pub fn tdbp_focus_with(
    rc: &RangeCompressedMatrix,
    geom: &BistaticGeometry,
    grid: &SceneGrid,
    carrier_frequency: f64,
    interpolator: Interpolator,
) -> Result<FocusOutput> {
    check_inputs(rc, geom, carrier_frequency)?;
    let table = kernel_table();
    let n = rc.n_fast();
    let last = (n - 1) as f64;
    let fs_over_c = rc.sample_rate / SPEED_OF_LIGHT;
    let origin_samples = rc.fast_time_origin * rc.sample_rate;
    let k_phase = 2.0 * PI * carrier_frequency / SPEED_OF_LIGHT;
    let rx: &[Vec3] = geom.receiver.positions();
    let weights = geom.receiver.integration_weights();
    let data = rc.data.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| rc.data.iter().copied().collect());
    let ny = grid.ny;

    let pixels: Vec<Option<Complex64>> = (0..grid.pixel_count())
        .into_par_iter()
        .map(|idx| {
            let p = grid.pixel(idx / ny, idx % ny);
            let (tx_leg, double) = match geom.transmitter {
                Transmitter::CoLocated => (0.0, true),
                Transmitter::Fixed(tx) => ((tx - p).norm(), false),
            };
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, pos) in rx.iter().enumerate() {
                let r = (pos - p).norm();
                let path = if double { 2.0 * r } else { tx_leg + r };
                let u = path * fs_over_c - origin_samples;
                if !(0.0..=last).contains(&u) {
                    return None;
                }
                let row = &data[k * n..(k + 1) * n];
                let sample = match interpolator {
                    Interpolator::Nearest => row[u.round() as usize],
                    Interpolator::WindowedSinc => {
                        let base = u.floor();
                        let frac = u - base;
                        let base = base as isize;
                        let mut s = Complex64::new(0.0, 0.0);
                        for m in -3isize..=4 {
                            let j = base + m;
                            if j < 0 || j >= n as isize {
                                continue;
                            }
                            s += row[j as usize] * kernel_lookup(table, frac - m as f64);
                        }
                        s
                    }
                };
                let (sin, cos) = (k_phase * path).sin_cos();
                acc += sample * Complex64::new(cos, sin) * weights[k];
            }
            Some(acc)
        })
        .collect();

    assemble(pixels, grid, carrier_frequency)
}

fn assemble(pixels: Vec<Option<Complex64>>, grid: &SceneGrid, carrier_frequency: f64) -> Result<FocusOutput> {
    let flagged = pixels.iter().filter(|p| p.is_none()).count();
    let values: Vec<Complex64> = pixels
        .into_iter()
        .map(|p| p.unwrap_or(Complex64::new(0.0, 0.0)))
        .collect();
    let pixels = Array2::from_shape_vec((grid.nx, grid.ny), values).map_err(|e| invalid(e.to_string()))?;
    Ok(FocusOutput {
        image: SarImage {
            pixels,
            grid: grid.clone(),
            wavelength: SPEED_OF_LIGHT / carrier_frequency,
        },
        out_of_window_pixels: flagged,
    })
}

/// Serial brute-force back-projection with the exact windowed-sinc kernel.
pub fn tdbp_reference(rc: &RangeCompressedMatrix, geom: &BistaticGeometry, grid: &SceneGrid, carrier_frequency: f64) -> Result<FocusOutput> {
    tdbp_reference_with(rc, geom, grid, carrier_frequency, Interpolator::WindowedSinc)
}

pub fn tdbp_reference_with(
    rc: &RangeCompressedMatrix,
    geom: &BistaticGeometry,
    grid: &SceneGrid,
    carrier_frequency: f64,
    interpolator: Interpolator,
) -> Result<FocusOutput> {
    check_inputs(rc, geom, carrier_frequency)?;
    let n = rc.n_fast();
    let weights = geom.receiver.integration_weights();
    let mut pixels = Vec::with_capacity(grid.pixel_count());
    for ix in 0..grid.nx {
        'pixel: for iy in 0..grid.ny {
            let p = grid.pixel(ix, iy);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &w) in weights.iter().enumerate() {
                let path = geom.path_length(k, &p);
                let delay = path / SPEED_OF_LIGHT;
                let u = (delay - rc.fast_time_origin) * rc.sample_rate;
                if u < 0.0 || u > (n - 1) as f64 {
                    pixels.push(None);
                    continue 'pixel;
                }
                let sample = match interpolator {
                    Interpolator::Nearest => rc.data[(k, u.round() as usize)],
                    Interpolator::WindowedSinc => {
                        let lo = (u - HALF_TAPS).ceil().max(0.0) as usize;
                        let hi = ((u + HALF_TAPS).floor() as usize).min(n - 1);
                        (lo..=hi)
                            .map(|j| rc.data[(k, j)] * kaiser_sinc(u - j as f64))
                            .sum()
                    }
                };
                let phase = 2.0 * PI * carrier_frequency * delay;
                acc += w * sample * Complex64::from_polar(1.0, phase);
            }
            pixels.push(Some(acc));
        }
    }
    assemble(pixels, grid, carrier_frequency)
}

/// Peak-to-background ratio around a known target, dB.
///
/// The peak is the brightest pixel within `exclusion_radius` (horizontal
/// distance) of `target_position`; the background is every pixel farther
/// than `exclusion_radius` from that peak. Returns `+∞` when the background
/// is exactly zero.
pub fn image_snr(image: &SarImage, target_position: &Vec3, exclusion_radius: f64) -> Result<f64> {
    let grid = &image.grid;
    if !grid.contains(target_position) {
        return Err(invalid("target lies outside the image grid"));
    }
    let horiz = |a: &Vec3, b: &Vec3| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    let (mut px, mut py) = grid.nearest_pixel(target_position);
    let mut best = image.pixels[(px, py)].norm_sqr();
    for ((ix, iy), v) in image.pixels.indexed_iter() {
        if horiz(&grid.pixel(ix, iy), target_position) <= exclusion_radius && v.norm_sqr() > best {
            best = v.norm_sqr();
            px = ix;
            py = iy;
        }
    }
    let center = grid.pixel(px, py);
    let (sum, count) = image
        .pixels
        .indexed_iter()
        .filter(|((ix, iy), _)| horiz(&grid.pixel(*ix, *iy), &center) > exclusion_radius)
        .fold((0.0, 0usize), |(s, c), (_, v)| (s + v.norm_sqr(), c + 1));
    if count == 0 {
        return Err(invalid(format!(
            "exclusion radius {exclusion_radius} m leaves no background pixels"
        )));
    }
    let mean = sum / count as f64;
    if mean == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (best / mean).log10())
}

/// PSLR of a one-dimensional magnitude cut: the mainlobe extends from the
/// maximum to the first local minimum on each side.
pub fn cut_pslr_db(mags: &[f64]) -> f64 {
    let n = mags.len();
    if n < 3 {
        return f64::NEG_INFINITY;
    }
    let i = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut lo = i;
    while lo > 0 && mags[lo - 1] < mags[lo] {
        lo -= 1;
    }
    let mut hi = i;
    while hi + 1 < n && mags[hi + 1] < mags[hi] {
        hi += 1;
    }
    let side = mags[..lo]
        .iter()
        .chain(&mags[hi + 1..])
        .copied()
        .fold(0.0, f64::max);
    20.0 * (side / mags[i]).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_linear_trajectory, Trajectory};
    use crate::signal::FastTimeMatrix;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_matches_known_values() {
        assert_relative_eq!(bessel_i0(0.0), 1.0);
        assert_relative_eq!(bessel_i0(1.0), 1.266_065_877_752_008_4, max_relative = 1e-14);
        assert_relative_eq!(bessel_i0(6.0), 67.234_406_976_478_1, max_relative = 1e-13);
    }

    #[test]
    fn kernel_is_interpolating() {
        assert_relative_eq!(kaiser_sinc(0.0), 1.0);
        for d in [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0, -4.0] {
            assert!(kaiser_sinc(d).abs() < 1e-15);
        }
        let t = kernel_table();
        for d in [-3.7, -1.25, -0.3, 0.0, 0.41, 2.9] {
            assert!((kernel_lookup(t, d) - kaiser_sinc(d)).abs() < 1e-6);
        }
    }

    #[test]
    fn reference_on_one_pixel_is_the_pulse_sum() {
        // two pulses, delays landing exactly on samples
        let fs = 1e6;
        let p = Vec3::new(0.0, 0.0, 0.0);
        let traj = Trajectory::new(
            vec![0.0, 1.0],
            vec![Vec3::new(0.0, 0.0, 1500.0), Vec3::new(0.0, 0.0, 3000.0)],
        )
        .unwrap();
        let geom = BistaticGeometry::monostatic(traj);
        let n = 64;
        let mut data = Array2::zeros((2, n));
        let u0 = 2.0 * 1500.0 / SPEED_OF_LIGHT * fs; // ~10.007 samples
        let u1 = 2.0 * 3000.0 / SPEED_OF_LIGHT * fs;
        data[(0, 10)] = Complex64::new(1.0, 0.0);
        data[(1, 20)] = Complex64::new(0.0, 2.0);
        let rc = RangeCompressedMatrix(FastTimeMatrix::new(data, fs, 0.0, vec![0.0, 1.0]).unwrap());
        let grid = SceneGrid::new(p, 1, 1, 1.0, 1.0).unwrap();
        let out = tdbp_reference(&rc, &geom, &grid, 1e9).unwrap();
        let f_c = 1e9;
        let hand = Complex64::new(1.0, 0.0) * kaiser_sinc(u0 - 10.0) * Complex64::from_polar(1.0, 2.0 * PI * f_c * u0 / fs)
            + Complex64::new(0.0, 2.0) * kaiser_sinc(u1 - 20.0) * Complex64::from_polar(1.0, 2.0 * PI * f_c * u1 / fs);
        assert!((out.image.pixels[(0, 0)] - hand).norm() < 1e-9);
    }

    #[test]
    fn mismatched_rows_rejected_and_out_of_window_flagged() {
        let traj = make_linear_trajectory(Vec3::new(0.0, 0.0, 100.0), Vec3::new(1.0, 0.0, 0.0), 10.0, 4).unwrap();
        let geom = BistaticGeometry::monostatic(traj);
        let rc = RangeCompressedMatrix(FastTimeMatrix::new(Array2::zeros((3, 32)), 1e6, 0.0, vec![0.0; 3]).unwrap());
        let grid = SceneGrid::new(Vec3::zeros(), 2, 2, 1.0, 1.0).unwrap();
        assert!(tdbp_focus(&rc, &geom, &grid, 1e9).is_err());
        assert!(tdbp_reference(&rc, &geom, &grid, 1e9).is_err());
        // 200 m two-way is 0.67 µs: a 32-sample window at 1 MHz starting at 1 ms misses it
        let rc = RangeCompressedMatrix(FastTimeMatrix::new(Array2::zeros((4, 32)), 1e6, 1e-3, vec![0.0; 4]).unwrap());
        let out = tdbp_focus(&rc, &geom, &grid, 1e9).unwrap();
        assert_eq!(out.out_of_window_pixels, 4);
        assert_eq!(tdbp_reference(&rc, &geom, &grid, 1e9).unwrap().out_of_window_pixels, 4);
    }

    #[test]
    fn zero_data_gives_zero_image() {
        let traj = make_linear_trajectory(Vec3::new(0.0, 0.0, 100.0), Vec3::new(1.0, 0.0, 0.0), 10.0, 4).unwrap();
        let geom = BistaticGeometry::monostatic(traj);
        let rc = RangeCompressedMatrix(FastTimeMatrix::new(Array2::zeros((4, 2048)), 1e6, 0.0, vec![0.0; 4]).unwrap());
        let grid = SceneGrid::new(Vec3::zeros(), 3, 3, 1.0, 1.0).unwrap();
        let out = tdbp_focus(&rc, &geom, &grid, 1e9).unwrap();
        assert_eq!(out.out_of_window_pixels, 0);
        assert!(out.image.pixels.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    fn image_from(values: Array2<Complex64>, d: f64) -> SarImage {
        let grid = SceneGrid::new(Vec3::zeros(), values.nrows(), values.ncols(), d, d).unwrap();
        SarImage {
            pixels: values,
            grid,
            wavelength: 0.05,
        }
    }

    #[test]
    fn image_snr_edge_cases() {
        let mut a = Array2::zeros((9, 9));
        a[(4, 4)] = Complex64::new(5.0, 0.0);
        let img = image_from(a.clone(), 1.0);
        assert_eq!(image_snr(&img, &Vec3::new(4.0, 4.0, 0.0), 1.5).unwrap(), f64::INFINITY);
        assert!(image_snr(&img, &Vec3::new(4.0, 4.0, 0.0), 100.0).is_err());
        assert!(image_snr(&img, &Vec3::new(40.0, 4.0, 0.0), 1.0).is_err());
        a[(0, 0)] = Complex64::new(0.5, 0.0);
        let img = image_from(a, 1.0);
        let n_bg = 81 - 9; // 3×3 block lies within 1.5 m of the peak
        let expect = 10.0 * (25.0 / (0.25 / n_bg as f64)).log10();
        assert_relative_eq!(image_snr(&img, &Vec3::new(4.0, 4.0, 0.0), 1.5).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn cut_pslr_of_sampled_sinc() {
        let mags: Vec<f64> = (0..801)
            .map(|i| {
                let x = (i as f64 - 400.0) / 20.0;
                if x == 0.0 {
                    1.0
                } else {
                    ((PI * x).sin() / (PI * x)).abs()
                }
            })
            .collect();
        assert!((cut_pslr_db(&mags) + 13.26).abs() < 0.05);
    }
}
