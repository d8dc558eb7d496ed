//! Absolute attitude from the accelerometer and absolute heading from the
//! magnetometer, each with its first-order MSE.

use nalgebra::Vector3;
use thiserror::Error;

/// Squared magnitudes below this are treated as a vanished projection.
pub const DEGENERATE_PROJECTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EstimatorError {
    #[error("accelerometer has no component in the body y-z plane (|a_yz|² = {0:e})")]
    DegenerateHorizontal(f64),
    #[error("magnetic field has no horizontal component after levelling (|B'_h|² = {0:e})")]
    DegenerateField(f64),
}

/// Specific force in the body frame, m/s².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelReading(pub Vector3<f64>);

/// Magnetic flux density in the body frame, normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagReading(pub Vector3<f64>);

fn yz_norm_sq(a: &Vector3<f64>) -> Result<f64, EstimatorError> {
    let h = a.y * a.y + a.z * a.z;
    if h <= DEGENERATE_PROJECTION {
        return Err(EstimatorError::DegenerateHorizontal(h));
    }
    Ok(h)
}

/// Roll and pitch of a body at rest, from the direction of gravity.
pub fn attitude_from_accel(a: &AccelReading) -> Result<(f64, f64), EstimatorError> {
    let v = &a.0;
    let h = yz_norm_sq(v)?;
    Ok(((-v.y).atan2(-v.z), v.x.atan2(h.sqrt())))
}

/// `(MSE(roll), MSE(pitch))` for per-axis accelerometer MSEs.
pub fn accel_attitude_mse(
    a: &AccelReading,
    per_axis_mse: &Vector3<f64>,
) -> Result<(f64, f64), EstimatorError> {
    let v = &a.0;
    let h = yz_norm_sq(v)?;
    let (ax2, ay2, az2) = (v.x * v.x, v.y * v.y, v.z * v.z);
    let norm2 = ax2 + h;
    let roll = (ay2 * per_axis_mse.z + az2 * per_axis_mse.y) / (h * h);
    let pitch = (h * h * per_axis_mse.x + ax2 * (ay2 * per_axis_mse.y + az2 * per_axis_mse.z))
        / (h * norm2 * norm2);
    Ok((roll, pitch))
}

/// Running mean and mean square of the accelerometer (one-pole IIR).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelAverager {
    window: usize,
    mean: Vector3<f64>,
    mean_square: Vector3<f64>,
    primed: bool,
}

impl AccelAverager {
    pub fn new(window: usize) -> Self {
        assert!(window >= 2, "averaging window must be at least 2");
        Self {
            window,
            mean: Vector3::zeros(),
            mean_square: Vector3::zeros(),
            primed: false,
        }
    }

    /// Starts from an explicit state, e.g. to resume a stream.
    pub fn with_state(window: usize, mean: Vector3<f64>, mean_square: Vector3<f64>) -> Self {
        Self {
            mean,
            mean_square,
            primed: true,
            ..Self::new(window)
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn mean(&self) -> Vector3<f64> {
        self.mean
    }

    pub fn mean_square(&self) -> Vector3<f64> {
        self.mean_square
    }

    pub fn is_primed(&self) -> bool {
        self.primed
    }

    /// Feeds one sample. The first sample seeds the state directly with the
    /// sensor's own MSE as its spread, so the first estimate carries the
    /// single-sample error instead of zero.
    pub fn update(&mut self, a: &AccelReading, base_mse: f64) {
        let x = a.0;
        if !self.primed {
            self.mean = x;
            self.mean_square = x.component_mul(&x).add_scalar(base_mse);
            self.primed = true;
            return;
        }
        let n = self.window as f64;
        self.mean_square = ((n - 1.0) * self.mean_square + x.component_mul(&x)) / n;
        self.mean = ((n - 1.0) * self.mean + x) / n;
    }

    /// Per-axis MSE of the running mean.
    pub fn mse(&self, base_mse: f64) -> Vector3<f64> {
        let n = self.window as f64;
        (self.mean_square - self.mean.component_mul(&self.mean))
            .add_scalar(base_mse / n)
            .map(|v| v.max(0.0))
    }

    pub fn averaged(&self) -> AccelReading {
        AccelReading(self.mean)
    }
}

/// Cut-off frequency of the averaging filter for window `n`.
pub fn iir_cutoff_frequency(n_window: usize, sample_rate: f64) -> f64 {
    let n = n_window as f64;
    sample_rate / std::f64::consts::TAU * (1.0 - 1.0 / (2.0 * n * (n - 1.0))).acos()
}

/// First two components of the field after removing roll and pitch.
fn level_field(b: &Vector3<f64>, roll: f64, pitch: f64) -> (f64, f64) {
    let (sa, ca) = roll.sin_cos();
    let (sb, cb) = pitch.sin_cos();
    (cb * b.x + sa * sb * b.y + ca * sb * b.z, ca * b.y - sa * b.z)
}

fn horizontal(b: &MagReading, roll: f64, pitch: f64) -> Result<(f64, f64), EstimatorError> {
    let (bx, by) = level_field(&b.0, roll, pitch);
    let h = bx * bx + by * by;
    if h <= DEGENERATE_PROJECTION {
        return Err(EstimatorError::DegenerateField(h));
    }
    Ok((bx, by))
}

pub fn heading_from_mag(b: &MagReading, roll: f64, pitch: f64) -> Result<f64, EstimatorError> {
    let (bx, by) = horizontal(b, roll, pitch)?;
    Ok((-by).atan2(bx))
}

/// MSE of the magnetometer heading, including the effect of the roll and
/// pitch errors used to level the field.
pub fn heading_mse(
    b: &MagReading,
    roll: f64,
    pitch: f64,
    mse_roll: f64,
    mse_pitch: f64,
    e_mag: f64,
) -> Result<f64, EstimatorError> {
    let (hx, hy) = horizontal(b, roll, pitch)?;
    let v = &b.0;
    let (sa, ca) = roll.sin_cos();
    let (sb, cb) = pitch.sin_cos();
    let sq = |x: f64| x * x;
    let mse_hx = sq(cb) * e_mag
        + sq(sa * sb) * e_mag
        + sq(ca * sb) * e_mag
        + sq(v.y * ca * sb - v.z * sa * sb) * mse_roll
        + sq(v.x * sb - v.y * sa * cb - v.z * ca * cb) * mse_pitch;
    let mse_hy = sq(ca) * e_mag + sq(sa) * e_mag + sq(v.z * ca + v.y * sa) * mse_roll;
    let h2 = hx * hx + hy * hy;
    Ok((hy * hy * mse_hx + hx * hx * mse_hy) / (h2 * h2))
}
