//! Rotation-matrix and Euler-angle kinematics (NED axes, ZYX convention).
//!
//! Matrix elements are indexed from zero in code. Where comments refer to
//! `R13` and friends they use the usual one-based row/column notation, so
//! `R13` is `m[(0, 2)]`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Vector3};

/// Tolerance on `|R13|` beyond which pitch is treated as ±90°.
pub const GIMBAL_LOCK_TOLERANCE: f64 = 1e-6;

/// Per-step increments above this size leave the first-order update's
/// region of validity.
pub const MAX_FIRST_ORDER_INCREMENT: f64 = 0.1;

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }

    pub fn to_degrees(&self) -> [f64; 3] {
        [
            self.roll.to_degrees(),
            self.pitch.to_degrees(),
            self.yaw.to_degrees(),
        ]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Roll and yaw wrapped into (−π, π], pitch clamped to [−π/2, π/2].
    pub fn normalized(&self) -> Self {
        Self::new(
            wrap_angle(self.roll),
            self.pitch.clamp(-FRAC_PI_2, FRAC_PI_2),
            wrap_angle(self.yaw),
        )
    }
}

/// Direction cosine matrix taking navigation-frame vectors into the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Largest elementwise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

/// Angular increment `ω·Δt` measured over one gyroscope sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroIncrement {
    pub delta: Vector3<f64>,
    pub dt: f64,
}

impl GyroIncrement {
    pub fn new(delta: Vector3<f64>, dt: f64) -> Self {
        debug_assert!(dt > 0.0, "gyro increment needs a positive sample period");
        Self { delta, dt }
    }

    pub fn from_rate(rate: &Vector3<f64>, dt: f64) -> Self {
        Self::new(rate * dt, dt)
    }

    pub fn zero(dt: f64) -> Self {
        Self::new(Vector3::zeros(), dt)
    }
}

/// Result of reading Euler angles back out of a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerExtraction {
    pub angles: EulerAngles,
    /// Pitch is at ±90° and roll was forced to zero.
    pub gimbal_lock: bool,
}

pub fn matrix_from_euler(angles: &EulerAngles) -> RotationMatrix {
    let (sa, ca) = angles.roll.sin_cos();
    let (sb, cb) = angles.pitch.sin_cos();
    let (sg, cg) = angles.yaw.sin_cos();
    RotationMatrix(Matrix3::new(
        cb * cg,
        cb * sg,
        -sb,
        sa * sb * cg - ca * sg,
        sa * sb * sg + ca * cg,
        sa * cb,
        ca * sb * cg + sa * sg,
        ca * sb * sg - sa * cg,
        ca * cb,
    ))
}

pub fn is_gimbal_locked(m: &RotationMatrix) -> bool {
    m.0[(0, 2)].abs() > 1.0 - GIMBAL_LOCK_TOLERANCE
}

pub fn euler_from_matrix(m: &RotationMatrix) -> EulerExtraction {
    let r = &m.0;
    let pitch = (-r[(0, 2)]).clamp(-1.0, 1.0).asin();
    if is_gimbal_locked(m) {
        // With roll pinned to zero the second row reduces to [-sin γ, cos γ, 0]
        // for either sign of the pitch.
        let yaw = (-r[(1, 0)]).atan2(r[(1, 1)]);
        return EulerExtraction {
            angles: EulerAngles::new(0.0, pitch, yaw),
            gimbal_lock: true,
        };
    }
    EulerExtraction {
        angles: EulerAngles::new(
            r[(1, 2)].atan2(r[(2, 2)]),
            pitch,
            r[(0, 1)].atan2(r[(0, 0)]),
        ),
        gimbal_lock: false,
    }
}

/// The infinitesimal update matrix `I − [δ×]` for one gyro sample.
pub fn update_matrix(inc: &GyroIncrement) -> Matrix3<f64> {
    let d = &inc.delta;
    Matrix3::new(1.0, d.z, -d.y, -d.z, 1.0, d.x, d.y, -d.x, 1.0)
}

/// Applies one first-order gyro update. The result is not re-orthonormalized.
pub fn gyro_increment_update(m: &RotationMatrix, inc: &GyroIncrement) -> RotationMatrix {
    if inc.delta.amax() > MAX_FIRST_ORDER_INCREMENT {
        log::warn!(
            "gyro increment {:.3} rad exceeds first-order limit {MAX_FIRST_ORDER_INCREMENT} rad",
            inc.delta.amax()
        );
    }
    RotationMatrix(update_matrix(inc) * m.0)
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// `a − b` along the shortest arc, in (−π, π].
pub fn wrap_angle_difference(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}
