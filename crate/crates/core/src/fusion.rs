//! Adaptive-gain fusion of the integrated gyroscope attitude with the
//! accelerometer attitude and magnetometer heading.
//!
//! Each step integrates the gyro increment, reads Euler angles and their MSE
//! off the integrated matrix, then pulls each angle toward its absolute
//! estimate with the gain that minimizes the fused MSE. Whenever at least one
//! absolute source was fused, the matrix and its MSE are rebuilt from the
//! fused angles, which also undoes the drift from orthonormality left by the
//! first-order update.

use nalgebra::Vector3;
use thiserror::Error;

use crate::absolute::{
    accel_attitude_mse, attitude_from_accel, heading_from_mag, heading_mse, AccelAverager,
    AccelReading, MagReading,
};
use crate::attitude::{
    euler_from_matrix, gyro_increment_update, matrix_from_euler, wrap_angle,
    wrap_angle_difference, EulerAngles, GyroIncrement, RotationMatrix,
};
use crate::mse::{
    euler_mse_from_matrix, initial_mse, matrix_mse_from_euler, propagate_matrix_mse, EulerMse,
    GyroNoiseModel, MatrixMse,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{field} must be {expected}, got {value}")]
    OutOfRange {
        field: &'static str,
        expected: &'static str,
        value: f64,
    },
}

fn check(ok: bool, field: &'static str, expected: &'static str, value: f64) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { field, expected, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainMode {
    /// MSE-optimal gain per angle and step.
    Adaptive,
    /// Constant gain for every angle (complementary filter).
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// MSE of each gyro increment `ω_i·Δt`, rad².
    pub e_gyro: f64,
    /// Per-axis magnetometer MSE, flux².
    pub e_mag: f64,
    /// Per-axis accelerometer MSE, (m/s²)².
    pub accel_base_mse: f64,
    /// Averaging window of the accelerometer IIR filter.
    pub window: usize,
    pub mode: GainMode,
    pub gyro_rate: f64,
    pub accel_rate: f64,
    pub mag_rate: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            e_gyro: 2e-5,
            e_mag: 5e-3,
            accel_base_mse: 1.0,
            window: 5,
            mode: GainMode::Adaptive,
            gyro_rate: 512.0,
            accel_rate: 512.0,
            mag_rate: 512.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.e_gyro >= 0.0, "fusion.e_gyro", "≥ 0", self.e_gyro)?;
        check(self.e_mag >= 0.0, "fusion.e_mag", "≥ 0", self.e_mag)?;
        check(self.accel_base_mse >= 0.0, "fusion.accel_base_mse", "≥ 0", self.accel_base_mse)?;
        check(self.window >= 2, "fusion.window", "≥ 2", self.window as f64)?;
        check(self.gyro_rate > 0.0, "fusion.gyro_rate", "> 0", self.gyro_rate)?;
        check(self.accel_rate > 0.0, "fusion.accel_rate", "> 0", self.accel_rate)?;
        check(self.mag_rate > 0.0, "fusion.mag_rate", "> 0", self.mag_rate)?;
        check(
            self.mag_rate <= self.gyro_rate,
            "fusion.mag_rate",
            "≤ fusion.gyro_rate",
            self.mag_rate,
        )?;
        if let GainMode::Fixed(k) = self.mode {
            check((0.0..=1.0).contains(&k), "fusion.k_fixed", "in [0, 1]", k)?;
        }
        Ok(())
    }

    pub fn gyro_noise(&self) -> GyroNoiseModel {
        GyroNoiseModel::new(self.e_gyro)
    }
}

/// Gain on the absolute source that minimizes the fused MSE.
pub fn optimal_gain(mse_gyro: f64, mse_abs: f64) -> f64 {
    let total = mse_gyro + mse_abs;
    if total <= 0.0 {
        return 0.0;
    }
    (mse_gyro / total).clamp(0.0, 1.0)
}

/// Returns `(fused, deviation)` with the difference taken along the shortest arc.
pub fn fuse_angle(gyro_angle: f64, abs_angle: f64, k: f64) -> (f64, f64) {
    let deviation = k * wrap_angle_difference(abs_angle, gyro_angle);
    (wrap_angle(gyro_angle + deviation), deviation)
}

pub fn fused_mse(mse_gyro: f64, mse_abs: f64, k: f64) -> f64 {
    k * k * mse_abs + (1.0 - k) * (1.0 - k) * mse_gyro
}

pub fn deviation_mse(mse_gyro: f64, mse_abs: f64, k: f64) -> f64 {
    k * k * (mse_abs + mse_gyro)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionState {
    pub rotation: RotationMatrix,
    pub rotation_mse: MatrixMse,
    pub averager: AccelAverager,
    pub step_count: u64,
    /// Most recently reported estimate.
    pub angles: EulerAngles,
    pub angle_mse: EulerMse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionOutput {
    pub angles: EulerAngles,
    pub angle_mse: EulerMse,
    /// Gyro-side angles before fusion.
    pub gyro_angles: EulerAngles,
    pub gains: [f64; 3],
    pub deviations: [f64; 3],
    pub deviation_mse: [f64; 3],
    pub gimbal_lock: bool,
    /// Which absolute estimates took part: roll/pitch from the accelerometer,
    /// yaw from the magnetometer.
    pub fused: [bool; 3],
}

impl FusionOutput {
    pub fn any_fused(&self) -> bool {
        self.fused.iter().any(|&f| f)
    }
}

/// One fusion stream: configuration plus mutable state.
#[derive(Debug, Clone)]
pub struct FusionEngine {
    cfg: FusionConfig,
    state: FusionState,
}

struct Absolute {
    angle: f64,
    mse: f64,
}

impl FusionEngine {
    pub fn new(cfg: FusionConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let state = FusionState {
            rotation: RotationMatrix::identity(),
            rotation_mse: matrix_mse_from_euler(&EulerAngles::default(), &initial_mse()),
            averager: AccelAverager::new(cfg.window),
            step_count: 0,
            angles: EulerAngles::default(),
            angle_mse: initial_mse(),
        };
        Ok(Self { cfg, state })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.cfg
    }

    pub fn state(&self) -> &FusionState {
        &self.state
    }

    pub fn angles(&self) -> EulerAngles {
        self.state.angles
    }

    pub fn angle_mse(&self) -> EulerMse {
        self.state.angle_mse
    }

    pub fn step(
        &mut self,
        gyro: &GyroIncrement,
        accel: Option<&AccelReading>,
        mag: Option<&MagReading>,
    ) -> FusionOutput {
        let noise = self.cfg.gyro_noise();
        let st = &mut self.state;

        let prop_mse = propagate_matrix_mse(&st.rotation_mse, &st.rotation, gyro, &noise);
        let r_u = gyro_increment_update(&st.rotation, gyro);
        let extraction = euler_from_matrix(&r_u);
        let gyro_angles = extraction.angles;
        let gyro_mse = euler_mse_from_matrix(&r_u, &prop_mse);

        let (roll_abs, pitch_abs) = match accel {
            Some(a) => {
                st.averager.update(a, self.cfg.accel_base_mse);
                accel_estimates(&st.averager, self.cfg.accel_base_mse)
            }
            None => (None, None),
        };

        let mut acc = Accumulator::new(gyro_angles.as_array(), gyro_mse.as_array());
        let mode = self.cfg.mode;
        acc.fuse(0, roll_abs, mode);
        acc.fuse(1, pitch_abs, mode);

        // Heading uses the best roll/pitch available at this point.
        let yaw_abs = mag.and_then(|b| {
            let mse_now = EulerMse::from_array(acc.mse).clamped();
            let (r, p) = (acc.angles[0], acc.angles[1]);
            let angle = heading_from_mag(b, r, p).ok()?;
            let m = heading_mse(b, r, p, mse_now.roll, mse_now.pitch, self.cfg.e_mag).ok()?;
            Some(Absolute { angle, mse: m })
        });
        acc.fuse(2, yaw_abs, mode);
        let Accumulator { angles, mse, gains, deviations, dev_mse, fused: fused_flags, .. } = acc;

        let fused_angles = EulerAngles::from_array(angles);
        let fused_mse = EulerMse::from_array(mse).clamped();
        if fused_flags.iter().any(|&f| f) {
            st.rotation = matrix_from_euler(&fused_angles);
            st.rotation_mse = matrix_mse_from_euler(&fused_angles, &fused_mse);
        } else {
            st.rotation = r_u;
            st.rotation_mse = prop_mse;
        }
        st.step_count += 1;
        st.angles = fused_angles;
        st.angle_mse = fused_mse;

        FusionOutput {
            angles: fused_angles,
            angle_mse: fused_mse,
            gyro_angles,
            gains,
            deviations,
            deviation_mse: dev_mse,
            gimbal_lock: extraction.gimbal_lock,
            fused: fused_flags,
        }
    }

    /// Gain the configured rule picks for the given pair of MSEs.
    pub fn gain_for(&self, mse_gyro: f64, mse_abs: f64) -> f64 {
        gain_for_mode(self.cfg.mode, mse_gyro, mse_abs)
    }
}

fn gain_for_mode(mode: GainMode, mse_gyro: f64, mse_abs: f64) -> f64 {
    match mode {
        GainMode::Adaptive => optimal_gain(mse_gyro, mse_abs),
        GainMode::Fixed(k) => k,
    }
}

struct Accumulator {
    gyro_mse: [f64; 3],
    angles: [f64; 3],
    mse: [f64; 3],
    gains: [f64; 3],
    deviations: [f64; 3],
    dev_mse: [f64; 3],
    fused: [bool; 3],
}

impl Accumulator {
    fn new(angles: [f64; 3], gyro_mse: [f64; 3]) -> Self {
        Self {
            gyro_mse,
            angles,
            mse: gyro_mse,
            gains: [0.0; 3],
            deviations: [0.0; 3],
            dev_mse: [0.0; 3],
            fused: [false; 3],
        }
    }

    fn fuse(&mut self, idx: usize, abs: Option<Absolute>, mode: GainMode) {
        let Some(abs) = abs else { return };
        let g = self.gyro_mse[idx];
        let k = gain_for_mode(mode, g, abs.mse);
        let (f, d) = fuse_angle(self.angles[idx], abs.angle, k);
        self.angles[idx] = f;
        self.deviations[idx] = d;
        self.gains[idx] = k;
        self.mse[idx] = fused_mse(g, abs.mse, k);
        self.dev_mse[idx] = deviation_mse(g, abs.mse, k);
        self.fused[idx] = true;
    }
}

fn accel_estimates(av: &AccelAverager, base_mse: f64) -> (Option<Absolute>, Option<Absolute>) {
    let averaged = av.averaged();
    let per_axis: Vector3<f64> = av.mse(base_mse);
    match (attitude_from_accel(&averaged), accel_attitude_mse(&averaged, &per_axis)) {
        (Ok((roll, pitch)), Ok((mr, mp))) => (
            Some(Absolute { angle: roll, mse: mr }),
            Some(Absolute { angle: pitch, mse: mp }),
        ),
        _ => (None, None),
    }
}
