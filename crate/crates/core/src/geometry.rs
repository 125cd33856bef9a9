//! Acquisition geometry: trajectories, image grids, point targets and the
//! monostatic / bistatic path lengths that feed both the echo simulator and
//! back-projection.
//!
//! Coordinates are local east-north-up meters.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{invalid, Result};

pub type Vec3 = Vector3<f64>;

/// Platform positions per pulse (stop-and-go).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    slow_time: Vec<f64>,
    positions: Vec<Vec3>,
    pri: f64,
    uniform: bool,
}

const UNIFORM_TOL_S: f64 = 1e-9;

impl Trajectory {
    /// Builds a trajectory from slow-time stamps and positions.
    ///
    /// The nominal PRI is the median spacing; the uniform flag is set when
    /// every spacing matches it within 1 ns.
    pub fn new(slow_time: Vec<f64>, positions: Vec<Vec3>) -> Result<Self> {
        if slow_time.is_empty() {
            return Err(invalid("trajectory has no samples"));
        }
        if slow_time.len() != positions.len() {
            return Err(invalid(format!(
                "{} slow-time stamps for {} positions",
                slow_time.len(),
                positions.len()
            )));
        }
        if positions.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(invalid("trajectory contains non-finite positions"));
        }
        let mut gaps: Vec<f64> = slow_time.windows(2).map(|w| w[1] - w[0]).collect();
        if gaps.iter().any(|g| !(*g > 0.0)) {
            return Err(invalid("slow time must be strictly increasing"));
        }
        let (pri, uniform) = if gaps.is_empty() {
            (0.0, true)
        } else {
            let raw = gaps.clone();
            gaps.sort_by(f64::total_cmp);
            let pri = gaps[gaps.len() / 2];
            let uniform = raw.iter().all(|g| (g - pri).abs() <= UNIFORM_TOL_S);
            (pri, uniform)
        };
        Ok(Self {
            slow_time,
            positions,
            pri,
            uniform,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn slow_time(&self) -> &[f64] {
        &self.slow_time
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    /// Nominal pulse repetition interval. Zero for single-pulse trajectories.
    pub fn pri(&self) -> f64 {
        self.pri
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Keeps every `step`-th pulse starting at the first.
    pub fn decimate(&self, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(invalid("decimation step must be at least 1"));
        }
        Self::new(
            self.slow_time.iter().step_by(step).copied().collect(),
            self.positions.iter().step_by(step).copied().collect(),
        )
    }

    /// Slow-time integration weights `Δτ_k / PRI`: exactly 1 on uniform
    /// trajectories, local mid-point spacing otherwise.
    pub fn integration_weights(&self) -> Vec<f64> {
        let n = self.len();
        if self.uniform || n < 2 {
            return vec![1.0; n];
        }
        let t = &self.slow_time;
        (0..n)
            .map(|k| {
                let span = match k {
                    0 => t[1] - t[0],
                    k if k == n - 1 => t[n - 1] - t[n - 2],
                    k => (t[k + 1] - t[k - 1]) / 2.0,
                };
                span / self.pri
            })
            .collect()
    }

    /// Reads the `tau_s,x_m,y_m,z_m` CSV format.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if header != ["tau_s", "x_m", "y_m", "z_m"] {
            return Err(crate::error::Error::Format(format!(
                "trajectory header must be `tau_s,x_m,y_m,z_m`, got `{}`",
                header.join(",")
            )));
        }
        let mut times = Vec::new();
        let mut pos = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| {
                    crate::error::Error::Format(format!("trajectory row {}: {e}", line + 1))
                })?;
            if v.len() != 4 {
                return Err(crate::error::Error::Format(format!(
                    "trajectory row {} has {} fields",
                    line + 1,
                    v.len()
                )));
            }
            times.push(v[0]);
            pos.push(Vec3::new(v[1], v[2], v[3]));
        }
        Self::new(times, pos)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["tau_s", "x_m", "y_m", "z_m"])?;
        for (t, p) in self.slow_time.iter().zip(&self.positions) {
            w.write_record([t.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Straight-line, constant-velocity trajectory sampled at `prf`.
pub fn make_linear_trajectory(start: Vec3, velocity: Vec3, prf: f64, n_pulses: usize) -> Result<Trajectory> {
    if !(prf > 0.0) {
        return Err(invalid(format!("prf must be positive, got {prf}")));
    }
    if n_pulses == 0 {
        return Err(invalid("a trajectory needs at least one pulse"));
    }
    let times: Vec<f64> = (0..n_pulses).map(|k| k as f64 / prf).collect();
    let positions = times.iter().map(|&t| start + velocity * t).collect();
    let mut traj = Trajectory::new(times, positions)?;
    // the nominal PRI is exact by construction
    traj.pri = 1.0 / prf;
    traj.uniform = true;
    Ok(traj)
}

/// Regular pixel lattice on a flat plane at `origin.z`.
///
/// Pixel `(ix, iy)` sits at `origin + (ix·dx, iy·dy, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrid {
    pub origin: Vec3,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl SceneGrid {
    pub fn new(origin: Vec3, nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("grid needs at least one pixel per axis"));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        if !origin.iter().all(|v| v.is_finite()) || !(dx.is_finite() && dy.is_finite()) {
            return Err(invalid("grid must be finite"));
        }
        Ok(Self { origin, nx, ny, dx, dy })
    }

    /// Grid with pixel `(nx/2, ny/2)` exactly at `center`.
    pub fn centered(center: Vec3, nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        let origin = center - Vec3::new((nx / 2) as f64 * dx, (ny / 2) as f64 * dy, 0.0);
        Self::new(origin, nx, ny, dx, dy)
    }

    pub fn pixel_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn pixel(&self, ix: usize, iy: usize) -> Vec3 {
        self.origin + Vec3::new(ix as f64 * self.dx, iy as f64 * self.dy, 0.0)
    }

    /// Nearest pixel indices to `p` (clamped to the grid).
    pub fn nearest_pixel(&self, p: &Vec3) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.dx).round().clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p.y - self.origin.y) / self.dy).round().clamp(0.0, (self.ny - 1) as f64);
        (fx as usize, fy as usize)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let fx = (p.x - self.origin.x) / self.dx;
        let fy = (p.y - self.origin.y) / self.dy;
        fx >= -0.5 && fy >= -0.5 && fx <= self.nx as f64 - 0.5 && fy <= self.ny as f64 - 0.5
    }
}

/// Point scatterer, optionally buried under `burial_depth` meters of snow.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTarget {
    pub position: Vec3,
    /// Radar cross section σ, m².
    pub rcs: f64,
    pub burial_depth: f64,
}

impl PointTarget {
    pub fn new(position: Vec3, rcs: f64, burial_depth: f64) -> Result<Self> {
        if !(rcs > 0.0) {
            return Err(invalid(format!("rcs must be positive, got {rcs}")));
        }
        if !(burial_depth >= 0.0) {
            return Err(invalid(format!("burial depth must be non-negative, got {burial_depth}")));
        }
        Ok(Self {
            position,
            rcs,
            burial_depth,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transmitter {
    /// Transmitter rides with the receiver (monostatic).
    CoLocated,
    /// Stationary transmitter.
    Fixed(Vec3),
}

/// Transmitter placement plus receiver trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BistaticGeometry {
    pub transmitter: Transmitter,
    pub receiver: Trajectory,
}

impl BistaticGeometry {
    pub fn monostatic(trajectory: Trajectory) -> Self {
        Self {
            transmitter: Transmitter::CoLocated,
            receiver: trajectory,
        }
    }

    pub fn bistatic(tx: Vec3, rx: Trajectory) -> Self {
        Self {
            transmitter: Transmitter::Fixed(tx),
            receiver: rx,
        }
    }

    pub fn n_pulses(&self) -> usize {
        self.receiver.len()
    }

    /// Total transmitter → point → receiver path length at pulse `k`.
    pub fn path_length(&self, k: usize, point: &Vec3) -> f64 {
        let rx = &self.receiver.positions[k];
        match self.transmitter {
            Transmitter::CoLocated => 2.0 * (rx - point).norm(),
            Transmitter::Fixed(tx) => (tx - point).norm() + (rx - point).norm(),
        }
    }

    /// One-way transmitter → point distance (monostatic: receiver → point).
    pub fn tx_range(&self, k: usize, point: &Vec3) -> f64 {
        match self.transmitter {
            Transmitter::CoLocated => (self.receiver.positions[k] - point).norm(),
            Transmitter::Fixed(tx) => (tx - point).norm(),
        }
    }

    pub fn rx_range(&self, k: usize, point: &Vec3) -> f64 {
        (self.receiver.positions[k] - point).norm()
    }
}

/// Path length per pulse for a fixed point.
pub fn range_history(geom: &BistaticGeometry, point: &Vec3) -> Vec<f64> {
    (0..geom.n_pulses()).map(|k| geom.path_length(k, point)).collect()
}
