//! Seeded synthetic IMU streams with exact ground truth.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::attitude::{matrix_from_euler, wrap_angle, EulerAngles};
use crate::calibration::{
    backprop_matrix, invert_calibration, CalibrationError, CalibrationParams, TemperatureScale,
    DEFAULT_FULL_SCALE,
};

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time {t} s is outside the trajectory [0, {duration}] s")]
    OutOfRange { t: f64, duration: f64 },
    #[error("invalid simulation setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Defect(#[from] CalibrationError),
}

/// Unit field with the given inclination below the horizon, pointing north.
pub fn reference_field(inclination: f64) -> Vector3<f64> {
    Vector3::new(inclination.cos(), 0.0, inclination.sin())
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryKind {
    Steady(EulerAngles),
    HarmonicRoll { amplitude: f64, freq: f64 },
    /// Smooth random motion through knots spaced `knot_interval` apart.
    PiecewiseRandom { seed: u64, max_rate: f64, knot_interval: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub angles: EulerAngles,
    /// Body angular rate, rad/s.
    pub body_rate: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    kind: TrajectoryKind,
    duration: f64,
    rate: f64,
    knots: Vec<[f64; 3]>,
}

const ROLL_LIMIT: f64 = 60.0 * PI / 180.0;
const PITCH_LIMIT: f64 = 45.0 * PI / 180.0;

fn smoothstep(u: f64) -> (f64, f64) {
    (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u))
}

impl Trajectory {
    pub fn new(kind: TrajectoryKind, duration: f64, rate: f64) -> Result<Self, SimError> {
        if !(duration > 0.0) || !(rate > 0.0) {
            return Err(SimError::Invalid(format!("duration {duration} and rate {rate} must be > 0")));
        }
        let knots = match kind {
            TrajectoryKind::PiecewiseRandom { seed, max_rate, knot_interval } => {
                if !(max_rate > 0.0) || !(knot_interval > 0.0) {
                    return Err(SimError::Invalid("max_rate and knot_interval must be > 0".into()));
                }
                random_knots(seed, max_rate, knot_interval, duration)
            }
            TrajectoryKind::HarmonicRoll { freq, .. } if !(freq > 0.0) => {
                return Err(SimError::Invalid(format!("harmonic frequency {freq} must be > 0")));
            }
            _ => Vec::new(),
        };
        Ok(Self { kind, duration, rate, knots })
    }

    pub fn kind(&self) -> &TrajectoryKind {
        &self.kind
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Samples at `i / rate` for `i = 0 .. n_samples`.
    pub fn n_samples(&self) -> usize {
        (self.duration * self.rate).floor() as usize + 1
    }

    pub fn truth_at(&self, t: f64) -> Result<Truth, SimError> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(SimError::OutOfRange { t, duration: self.duration });
        }
        Ok(match self.kind {
            TrajectoryKind::Steady(angles) => Truth { angles, body_rate: Vector3::zeros() },
            TrajectoryKind::HarmonicRoll { amplitude, freq } => {
                let w = 2.0 * PI * freq;
                Truth {
                    angles: EulerAngles::new(amplitude * (w * t).sin(), 0.0, 0.0),
                    body_rate: Vector3::new(amplitude * w * (w * t).cos(), 0.0, 0.0),
                }
            }
            TrajectoryKind::PiecewiseRandom { knot_interval, .. } => {
                let seg = ((t / knot_interval).floor() as usize).min(self.knots.len() - 2);
                let u = (t - seg as f64 * knot_interval) / knot_interval;
                let (s, ds) = smoothstep(u.clamp(0.0, 1.0));
                let (a, b) = (self.knots[seg], self.knots[seg + 1]);
                let ang: [f64; 3] = std::array::from_fn(|i| a[i] + (b[i] - a[i]) * s);
                let rates = Vector3::from_fn(|i, _| (b[i] - a[i]) * ds / knot_interval);
                let angles = EulerAngles::new(ang[0], ang[1], wrap_angle(ang[2]));
                Truth { angles, body_rate: backprop_matrix(ang[0], ang[1]) * rates }
            }
        })
    }
}

/// Knot-to-knot change per angle is capped so that each Euler rate stays
/// below `max_rate / 3`; the columns of the rate map have unit norm, so the
/// body rate then stays below `max_rate`.
fn random_knots(seed: u64, max_rate: f64, interval: f64, duration: f64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_step = (2.0 / 3.0) * interval * max_rate / 3.0;
    let n = (duration / interval).ceil() as usize + 2;
    let mut knots = Vec::with_capacity(n);
    let mut cur = [0.0, 0.0, rng.random_range(-PI..PI)];
    knots.push(cur);
    let limits = [ROLL_LIMIT, PITCH_LIMIT, f64::INFINITY];
    for _ in 1..n {
        for i in 0..3 {
            let step = rng.random_range(-max_step..=max_step);
            cur[i] = (cur[i] + step).clamp(-limits[i], limits[i]);
        }
        knots.push(cur);
    }
    knots
}

/// Static specific force and magnetic field seen in the body frame.
pub fn project_clean(angles: &EulerAngles, gravity: f64, b_ref: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let r = matrix_from_euler(angles).0;
    (-(r * Vector3::new(0.0, 0.0, gravity)), r * b_ref)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub gyro_rms: f64,
    pub gyro_bias: Vector3<f64>,
    pub accel_rms: f64,
    /// Per-axis field noise RMS, in units of the reference field magnitude.
    pub mag_rms: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { gyro_rms: 0.0, gyro_bias: Vector3::zeros(), accel_rms: 0.0, mag_rms: 0.0, seed: 0 }
    }

    /// 0.5 °/s gyro noise with a 20 °/s bias on every axis, 1 m/s²
    /// accelerometer noise and 10 % field noise.
    pub fn table_i(seed: u64) -> Self {
        let d = PI / 180.0;
        Self {
            gyro_rms: 0.5 * d,
            gyro_bias: Vector3::repeat(20.0 * d),
            accel_rms: 1.0,
            mag_rms: 0.1,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemperatureProfile {
    Constant(f64),
    /// Linear ramp over the trajectory duration, °C.
    Ramp { start: f64, end: f64 },
}

impl TemperatureProfile {
    pub fn at(&self, t: f64, duration: f64) -> f64 {
        match *self {
            Self::Constant(c) => c,
            Self::Ramp { start, end } => start + (end - start) * (t / duration).clamp(0.0, 1.0),
        }
    }
}

/// Gyro calibration defects: the raw channel is whatever the true parameters
/// map onto the physical rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectSpec {
    pub params: CalibrationParams,
    pub temperature: TemperatureProfile,
    pub temp_scale: TemperatureScale,
}

impl DefectSpec {
    /// Constant zeroth-order biases given in rad/s.
    pub fn constant_bias(bias: Vector3<f64>, full_scale: f64) -> Self {
        let mut params = CalibrationParams::zeros(0).expect("order 0 is valid");
        for i in 0..3 {
            params.bias[i][0] = bias[i] / full_scale;
        }
        Self {
            params,
            temperature: TemperatureProfile::Constant(25.0),
            temp_scale: TemperatureScale::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub trajectory: Trajectory,
    pub noise: NoiseSpec,
    pub defects: Option<DefectSpec>,
    pub gravity: f64,
    pub b_ref: Vector3<f64>,
    pub accel_rate: f64,
    pub mag_rate: f64,
    pub full_scale: f64,
    /// Temperature reported when no defect profile is configured, °C.
    pub temperature: f64,
}

impl SimConfig {
    pub fn new(trajectory: Trajectory, noise: NoiseSpec) -> Self {
        let r = trajectory.rate();
        Self {
            trajectory,
            noise,
            defects: None,
            gravity: STANDARD_GRAVITY,
            b_ref: reference_field(30f64.to_radians()),
            accel_rate: r,
            mag_rate: r,
            full_scale: DEFAULT_FULL_SCALE,
            temperature: 25.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let r = self.trajectory.rate();
        let bad = |m: String| Err(SimError::Invalid(m));
        if !(self.accel_rate > 0.0 && self.accel_rate <= r) {
            return bad(format!("accel_rate {} must be in (0, {r}]", self.accel_rate));
        }
        if !(self.mag_rate > 0.0 && self.mag_rate <= r) {
            return bad(format!("mag_rate {} must be in (0, {r}]", self.mag_rate));
        }
        let n = &self.noise;
        if !(n.gyro_rms >= 0.0 && n.accel_rms >= 0.0 && n.mag_rms >= 0.0) {
            return bad("noise RMS values must be ≥ 0".into());
        }
        if !(self.full_scale > 0.0) {
            return bad(format!("full_scale {} must be > 0", self.full_scale));
        }
        if let Some(d) = &self.defects {
            d.params.validate()?;
        }
        Ok(())
    }
}

/// One time step of sensor data. The gyro channel is raw, scaled to rad/s by
/// the full scale (identical to the physical rate when there are no defects).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSample {
    pub t: f64,
    pub gyro: Vector3<f64>,
    pub accel: Option<Vector3<f64>>,
    pub mag: Option<Vector3<f64>>,
    /// °C
    pub temp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub sample: SensorSample,
    pub truth: Truth,
    /// Physical rate plus noise and additive bias, before any defect mapping.
    pub gyro_physical: Vector3<f64>,
}

/// True when a sensor at `sub_rate` delivers a sample at gyro index `i`.
pub fn present_at(i: usize, sub_rate: f64, rate: f64) -> bool {
    if i == 0 || sub_rate >= rate {
        return true;
    }
    let ratio = sub_rate / rate;
    (i as f64 * ratio).floor() != ((i - 1) as f64 * ratio).floor()
}

pub struct SampleStream<'a> {
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    index: usize,
    n: usize,
}

pub fn generate_stream(cfg: &SimConfig) -> Result<SampleStream<'_>, SimError> {
    cfg.validate()?;
    Ok(SampleStream {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.noise.seed),
        index: 0,
        n: cfg.trajectory.n_samples(),
    })
}

impl SampleStream<'_> {
    fn gauss(&mut self, sigma: f64) -> Vector3<f64> {
        let mut draw = || self.rng.sample::<f64, _>(StandardNormal);
        let v = Vector3::new(draw(), draw(), draw());
        v * sigma
    }
}

impl Iterator for SampleStream<'_> {
    type Item = SimRecord;

    fn next(&mut self) -> Option<SimRecord> {
        if self.index >= self.n {
            return None;
        }
        let cfg = self.cfg;
        let i = self.index;
        self.index += 1;
        let traj = &cfg.trajectory;
        let t = (i as f64 / traj.rate()).min(traj.duration());
        let truth = traj.truth_at(t).expect("sample times lie inside the trajectory");
        let (accel, mag) = project_clean(&truth.angles, cfg.gravity, &cfg.b_ref);

        let noise = cfg.noise;
        let gyro_physical = truth.body_rate + noise.gyro_bias + self.gauss(noise.gyro_rms);
        let accel = present_at(i, cfg.accel_rate, traj.rate()).then(|| accel + self.gauss(noise.accel_rms));
        let mag_scale = cfg.b_ref.norm() * noise.mag_rms;
        let mag = present_at(i, cfg.mag_rate, traj.rate()).then(|| mag + self.gauss(mag_scale));

        let (gyro, temp) = match &cfg.defects {
            Some(d) => {
                let temp = d.temperature.at(t, traj.duration());
                let w = invert_calibration(&gyro_physical, d.temp_scale.normalize(temp), &d.params, cfg.full_scale)
                    .expect("defect parameters validated");
                (w * cfg.full_scale, temp)
            }
            None => (gyro_physical, cfg.temperature),
        };
        Some(SimRecord { sample: SensorSample { t, gyro, accel, mag, temp }, truth, gyro_physical })
    }
}
