//! First-order mean-square-error propagation through the attitude pipeline.
//!
//! Every stage treats its inputs as independent, so only elementwise
//! variances travel through the chain (no cross-covariances).

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix3;

use crate::attitude::{is_gimbal_locked, matrix_from_euler, EulerAngles, GyroIncrement, RotationMatrix};

pub const MAX_ROLL_MSE: f64 = PI * PI;
pub const MAX_PITCH_MSE: f64 = FRAC_PI_2 * FRAC_PI_2;
pub const MAX_YAW_MSE: f64 = PI * PI;

/// Mean square errors of roll, pitch and yaw, in rad².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerMse {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerMse {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    /// The low-quality starting point `(π², (π/2)², π²)`, also used as the cap.
    pub const fn initial() -> Self {
        Self::new(MAX_ROLL_MSE, MAX_PITCH_MSE, MAX_YAW_MSE)
    }

    pub fn clamped(&self) -> Self {
        let max = Self::initial();
        Self::new(
            clamp_nonneg(self.roll, max.roll),
            clamp_nonneg(self.pitch, max.pitch),
            clamp_nonneg(self.yaw, max.yaw),
        )
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Elementwise MSE of a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixMse(pub Matrix3<f64>);

impl MatrixMse {
    pub fn zeros() -> Self {
        Self(Matrix3::zeros())
    }

    pub fn uniform(v: f64) -> Self {
        Self(Matrix3::repeat(v))
    }

    pub fn clamped(&self) -> Self {
        Self(self.0.map(|v| clamp_nonneg(v, 1.0)))
    }
}

/// Per-axis MSE of the gyro increment `ω_i·Δt`, in rad².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroNoiseModel {
    pub e_gyro: f64,
}

impl GyroNoiseModel {
    pub fn new(e_gyro: f64) -> Self {
        debug_assert!(e_gyro >= 0.0);
        Self { e_gyro }
    }

    /// Increment MSE for a white rate error of `rms` rad/s sampled every `dt` seconds.
    pub fn from_rate_rms(rms: f64, dt: f64) -> Self {
        Self::new((rms * dt).powi(2))
    }
}

fn clamp_nonneg(v: f64, max: f64) -> f64 {
    if v.is_nan() {
        return max;
    }
    v.clamp(0.0, max)
}

pub fn initial_mse() -> EulerMse {
    EulerMse::initial()
}

/// MSE of `R_update·R` given the MSE of `R` and the gyro increment noise.
///
/// The increments themselves supply the sensitivity of each updated element
/// to its neighbours, so a zero increment only adds the gyro noise terms.
pub fn propagate_matrix_mse(
    prior: &MatrixMse,
    m: &RotationMatrix,
    inc: &GyroIncrement,
    noise: &GyroNoiseModel,
) -> MatrixMse {
    let r = &m.0;
    let p = &prior.0;
    let e = noise.e_gyro;
    let (dx2, dy2, dz2) = (inc.delta.x.powi(2), inc.delta.y.powi(2), inc.delta.z.powi(2));
    let mut out = Matrix3::zeros();
    for k in 0..3 {
        let (r1, r2, r3) = (r[(0, k)], r[(1, k)], r[(2, k)]);
        let (p1, p2, p3) = (p[(0, k)], p[(1, k)], p[(2, k)]);
        out[(0, k)] = p1 + (r2 * r2 + r3 * r3) * e + dy2 * p3 + dz2 * p2;
        out[(1, k)] = p2 + (r3 * r3 + r1 * r1) * e + dz2 * p1 + dx2 * p3;
        out[(2, k)] = p3 + (r1 * r1 + r2 * r2) * e + dx2 * p2 + dy2 * p1;
    }
    MatrixMse(out).clamped()
}

/// MSE of the Euler angles read from `m`; saturated at gimbal lock.
pub fn euler_mse_from_matrix(m: &RotationMatrix, mse: &MatrixMse) -> EulerMse {
    if is_gimbal_locked(m) {
        return EulerMse::initial();
    }
    let r = &m.0;
    let q = &mse.0;
    let (r11, r12, r13) = (r[(0, 0)], r[(0, 1)], r[(0, 2)]);
    let (r23, r33) = (r[(1, 2)], r[(2, 2)]);
    let roll_den = (r23 * r23 + r33 * r33).powi(2);
    let yaw_den = (r11 * r11 + r12 * r12).powi(2);
    let roll = (r33 * r33 * q[(1, 2)] + r23 * r23 * q[(2, 2)]) / roll_den;
    let pitch = q[(0, 2)] / (1.0 - r13 * r13);
    let yaw = (r11 * r11 * q[(0, 1)] + r12 * r12 * q[(0, 0)]) / yaw_den;
    EulerMse::new(roll, pitch, yaw).clamped()
}

/// MSE of every element of the matrix built from `angles`.
///
/// Uses the form where the bracketed sensitivities are replaced by the
/// matching elements of the rebuilt matrix.
pub fn matrix_mse_from_euler(angles: &EulerAngles, mse: &EulerMse) -> MatrixMse {
    let r = matrix_from_euler(angles).0;
    let (sa, ca) = angles.roll.sin_cos();
    let (sb, cb) = angles.pitch.sin_cos();
    let (sg, cg) = angles.yaw.sin_cos();
    let (ma, mb, mg) = (mse.roll, mse.pitch, mse.yaw);
    let sq = |x: f64| x * x;
    MatrixMse(Matrix3::new(
        sq(sb * cg) * mb + sq(r[(0, 1)]) * mg,
        sq(sb * sg) * mb + sq(r[(0, 0)]) * mg,
        sq(cb) * mb,
        sq(r[(2, 0)]) * ma + sq(sa * cb * cg) * mb + sq(r[(1, 1)]) * mg,
        sq(r[(2, 1)]) * ma + sq(sa * cb * sg) * mb + sq(r[(1, 0)]) * mg,
        sq(r[(2, 2)]) * ma + sq(sa * sb) * mb,
        sq(r[(1, 0)]) * ma + sq(ca * cb * cg) * mb + sq(r[(2, 1)]) * mg,
        sq(r[(1, 1)]) * ma + sq(ca * cb * sg) * mb + sq(r[(2, 0)]) * mg,
        sq(r[(1, 2)]) * ma + sq(ca * sb) * mb,
    ))
    .clamped()
}
