//! Emulating an OFDM acquisition from range-compressed chirp data.
//!
//! A chirp-compressed row is a band-limited estimate of the scene's range
//! profile, so convolving it with an OFDM pulse gives the raw echo that pulse
//! would have produced. The result can then go through the usual OFDM
//! compression and focusing chain.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::RawDataMatrix;
use crate::compression::RangeCompressedMatrix;
use crate::error::{invalid, Error, Result};
use crate::geometry::Trajectory;
use crate::signal::{zero_padded, ComplexSignal, FastTimeMatrix, FftPair};

/// Convolves every row of `rc_chirp` with `ofdm_pulse`.
///
/// The convolution is linear (FFT length at least row + pulse − 1) and
/// cropped to the first `n_fast` samples. Output sample `i` therefore sits at
/// `rc_chirp.fast_time_origin + ofdm_pulse.t0 + i/f_s`; compressing it
/// against the same pulse moves the origin back by `t0`.
pub fn emulate_ofdm_from_chirp(rc_chirp: &RangeCompressedMatrix, ofdm_pulse: &ComplexSignal) -> Result<RawDataMatrix> {
    let fs = rc_chirp.sample_rate;
    if (ofdm_pulse.sample_rate - fs).abs() > 1e-9 * fs {
        return Err(Error::SampleRateMismatch {
            data_hz: fs,
            pulse_hz: ofdm_pulse.sample_rate,
            factor: fs / ofdm_pulse.sample_rate,
        });
    }
    let n = rc_chirp.n_fast();
    if n == 0 {
        return Err(invalid("range-compressed rows are empty"));
    }
    let m = ofdm_pulse.len();
    let l = (n + m - 1).next_power_of_two();
    let fft = FftPair::new(l);
    let mut g = zero_padded(&ofdm_pulse.samples, l)?;
    fft.forward(&mut g);

    let mut data = Array2::<Complex64>::zeros((rc_chirp.n_pulses(), n));
    data.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(rc_chirp.data.axis_iter(Axis(0)).into_par_iter())
        .for_each(|(mut out, row)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); l];
            for (b, v) in buf.iter_mut().zip(row.iter()) {
                *b = *v;
            }
            fft.forward(&mut buf);
            for (b, h) in buf.iter_mut().zip(&g) {
                *b *= h;
            }
            fft.inverse(&mut buf);
            for (o, v) in out.iter_mut().zip(&buf[..n]) {
                *o = *v;
            }
        });
    let matrix = FastTimeMatrix::new(
        data,
        fs,
        rc_chirp.fast_time_origin + ofdm_pulse.t0,
        rc_chirp.slow_time.clone(),
    )?;
    Ok(RawDataMatrix(matrix))
}

/// Lowers the PRF by keeping every `k`-th pulse, `k = PRF_source/target_prf`.
///
/// Only whole-number ratios are supported; slow-time interpolation is not.
pub fn adapt_prf(
    rc: &RangeCompressedMatrix,
    trajectory: &Trajectory,
    target_prf: f64,
) -> Result<(RangeCompressedMatrix, Trajectory)> {
    if rc.n_pulses() != trajectory.len() {
        return Err(invalid(format!(
            "{} rows for {} trajectory samples",
            rc.n_pulses(),
            trajectory.len()
        )));
    }
    if !(target_prf > 0.0 && target_prf.is_finite()) {
        return Err(invalid(format!("target PRF must be positive, got {target_prf}")));
    }
    if trajectory.len() < 2 {
        return Err(invalid("PRF is undefined for fewer than two pulses"));
    }
    if !trajectory.is_uniform() {
        return Err(Error::Unsupported(
            "PRF adaptation of a non-uniform trajectory".into(),
        ));
    }
    let source_prf = 1.0 / trajectory.pri();
    let ratio = source_prf / target_prf;
    let step = ratio.round();
    if ratio < 1.0 - 1e-9 {
        return Err(Error::Unsupported(format!(
            "raising the PRF from {source_prf} Hz to {target_prf} Hz"
        )));
    }
    if (ratio - step).abs() > 1e-6 * ratio {
        return Err(Error::Unsupported(format!(
            "PRF ratio {ratio} is not a whole number"
        )));
    }
    let step = step as usize;
    let rows: Vec<usize> = (0..rc.n_pulses()).step_by(step).collect();
    let data = rc.data.select(Axis(0), &rows);
    let slow_time = rows.iter().map(|&k| rc.slow_time[k]).collect();
    let matrix = FastTimeMatrix::new(data, rc.sample_rate, rc.fast_time_origin, slow_time)?;
    Ok((RangeCompressedMatrix(matrix), trajectory.decimate(step)?))
}
