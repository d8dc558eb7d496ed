//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Vectors are comma separated.
//! Every key is optional; see `KEYS` for the full list and `RunConfig::default`
//! for the defaults.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use thiserror::Error;

use crate::attitude::EulerAngles;
use crate::calibration::{
    AdamConfig, AlignmentGradient, CalibrationParams, CalibratorConfig, DtCalPolicy,
    TemperatureScale, DEFAULT_FULL_SCALE,
};
use crate::fusion::{FusionConfig, GainMode};
use crate::sim::{
    reference_field, DefectSpec, NoiseSpec, SimConfig, TemperatureProfile, Trajectory,
    TrajectoryKind, STANDARD_GRAVITY,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Simulate,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryChoice {
    Steady,
    HarmonicRoll,
    PiecewiseRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub trajectory: TrajectoryChoice,
    pub duration: f64,
    pub angles: EulerAngles,
    pub amplitude: f64,
    pub freq: f64,
    pub max_rate: f64,
    pub knot_interval: f64,
    /// Defaults to the run seed.
    pub traj_seed: Option<u64>,
    pub gyro_rms: f64,
    pub gyro_bias: Vector3<f64>,
    pub accel_rms: f64,
    pub mag_rms: f64,
    pub gravity: f64,
    pub inclination: f64,
    pub temperature: f64,
    /// Ramp end temperature; constant when absent.
    pub temperature_end: Option<f64>,
    /// Injected calibration defects, rad/s and dimensionless.
    pub defect_bias: Vector3<f64>,
    pub defect_gain: Vector3<f64>,
}

impl Default for SimSettings {
    fn default() -> Self {
        let noise = NoiseSpec::table_i(0);
        Self {
            trajectory: TrajectoryChoice::Steady,
            duration: 100.0,
            angles: EulerAngles::from_degrees(30.0, -45.0, 60.0),
            amplitude: 60f64.to_radians(),
            freq: 1.0,
            max_rate: 90f64.to_radians(),
            knot_interval: 1.0,
            traj_seed: None,
            gyro_rms: noise.gyro_rms,
            gyro_bias: noise.gyro_bias,
            accel_rms: noise.accel_rms,
            mag_rms: noise.mag_rms,
            gravity: STANDARD_GRAVITY,
            inclination: 30f64.to_radians(),
            temperature: 25.0,
            temperature_end: None,
            defect_bias: Vector3::zeros(),
            defect_gain: Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    pub enabled: bool,
    pub poly_order: usize,
    pub learner: CalibratorConfig,
    pub temp_scale: TemperatureScale,
    /// Write one trace row every this many samples.
    pub trace_every: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            poly_order: 0,
            learner: CalibratorConfig::default(),
            temp_scale: TemperatureScale::default(),
            trace_every: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSettings {
    /// Errors before this time are left out of RMS and mean gains, s.
    pub settle: f64,
    pub final_window: f64,
    pub hold: f64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self { settle: 5.0, final_window: 10.0, hold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: RunMode,
    pub seed: u64,
    pub fusion: FusionConfig,
    pub calibration: CalibrationSettings,
    pub sim: SimSettings,
    pub input: Option<PathBuf>,
    pub write_stream: bool,
    pub report: ReportSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::Simulate,
            seed: 1,
            fusion: FusionConfig::default(),
            calibration: CalibrationSettings::default(),
            sim: SimSettings::default(),
            input: None,
            write_stream: true,
            report: ReportSettings::default(),
        }
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "integer seed for noise and random motion"),
    ("fusion.mode", "adaptive | fixed"),
    ("fusion.k_fixed", "gain for fixed mode, in [0, 1]"),
    ("fusion.e_gyro", "MSE of one gyro increment, rad²"),
    ("fusion.e_mag", "per-axis magnetometer MSE, field units²"),
    ("fusion.accel_base_mse", "per-axis accelerometer MSE, (m/s²)²"),
    ("fusion.window", "accelerometer averaging window N"),
    ("fusion.gyro_rate", "Hz"),
    ("fusion.accel_rate", "Hz"),
    ("fusion.mag_rate", "Hz"),
    ("calibration.enabled", "true | false"),
    ("calibration.poly_order", "temperature polynomial order, 0..=3"),
    ("calibration.full_scale_dps", "gyro full scale, °/s"),
    ("calibration.e_max", "deviation RMS limit for learning, rad (default 5 % of full scale)"),
    ("calibration.dt_cal", "auto | period in s"),
    ("calibration.beta1", "Adam first-moment factor"),
    ("calibration.beta2", "Adam second-moment factor"),
    ("calibration.epsilon", "Adam epsilon"),
    ("calibration.lambda_bias", "bias learning rate"),
    ("calibration.lambda_gain", "gain learning rate"),
    ("calibration.lambda_align", "alignment learning rate"),
    ("calibration.learn_bias", "true | false"),
    ("calibration.learn_gain", "true | false"),
    ("calibration.learn_alignment", "true | false"),
    ("calibration.alignment_gradient", "printed | exact"),
    ("calibration.temp_min", "°C mapped to −1"),
    ("calibration.temp_max", "°C mapped to +1"),
    ("calibration.trace_every", "samples between trace rows"),
    ("sim.trajectory", "steady | harmonic_roll | piecewise_random"),
    ("sim.duration", "s"),
    ("sim.angles_deg", "roll, pitch, yaw for steady"),
    ("sim.amplitude_deg", "harmonic roll amplitude"),
    ("sim.freq", "harmonic roll frequency, Hz"),
    ("sim.max_rate_dps", "random motion rate limit, °/s"),
    ("sim.knot_interval", "random motion knot spacing, s"),
    ("sim.traj_seed", "seed of the random motion (default: seed)"),
    ("sim.gyro_rms_dps", "gyro white noise, °/s"),
    ("sim.gyro_bias_dps", "additive gyro bias x, y, z, °/s"),
    ("sim.accel_rms", "m/s²"),
    ("sim.mag_rms", "fraction of the field magnitude"),
    ("sim.gravity", "m/s²"),
    ("sim.inclination_deg", "field inclination below the horizon"),
    ("sim.temperature", "°C, or ramp start"),
    ("sim.temperature_end", "°C at the end of a linear ramp"),
    ("sim.defect_bias", "raw-channel bias x, y, z, rad/s"),
    ("sim.defect_gain", "raw-channel gain error x, y, z"),
    ("io.input", "CSV to replay"),
    ("io.write_stream", "write the simulated input as stream.csv"),
    ("report.settle", "s excluded at the start of RMS and gain statistics"),
    ("report.final_window", "s at the end used as the steady reference"),
    ("report.hold", "s the error must stay in band to count as converged"),
];

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("expected a number, got {v:?}"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn parse_vec3(v: &str) -> Result<Vector3<f64>, String> {
    let parts: Vec<_> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {v:?}"));
    }
    Ok(Vector3::new(parse_f64(parts[0])?, parse_f64(parts[1])?, parse_f64(parts[2])?))
}

fn parse_int<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse::<T>().map_err(|_| format!("expected a non-negative integer, got {v:?}"))
}

impl RunConfig {
    /// Parses configuration text on top of the defaults; `origin` names the source in errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut k_fixed = 0.05;
        let mut fixed = false;
        let mut full_scale = DEFAULT_FULL_SCALE;
        let mut e_max: Option<f64> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ConfigError::Parse { path: origin.to_string(), line: idx + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (key, v) = (key.trim(), value.trim());
            let d = |x: f64| x.to_radians();
            let r: Result<(), String> = (|| {
                let c = &mut cfg;
                match key {
                    "seed" => c.seed = parse_int(v)?,
                    "fusion.mode" => {
                        fixed = match v {
                            "adaptive" => false,
                            "fixed" => true,
                            _ => return Err(format!("expected adaptive or fixed, got {v:?}")),
                        }
                    }
                    "fusion.k_fixed" => k_fixed = parse_f64(v)?,
                    "fusion.e_gyro" => c.fusion.e_gyro = parse_f64(v)?,
                    "fusion.e_mag" => c.fusion.e_mag = parse_f64(v)?,
                    "fusion.accel_base_mse" => c.fusion.accel_base_mse = parse_f64(v)?,
                    "fusion.window" => c.fusion.window = parse_int(v)?,
                    "fusion.gyro_rate" => c.fusion.gyro_rate = parse_f64(v)?,
                    "fusion.accel_rate" => c.fusion.accel_rate = parse_f64(v)?,
                    "fusion.mag_rate" => c.fusion.mag_rate = parse_f64(v)?,
                    "calibration.enabled" => c.calibration.enabled = parse_bool(v)?,
                    "calibration.poly_order" => c.calibration.poly_order = parse_int(v)?,
                    "calibration.full_scale_dps" => full_scale = d(parse_f64(v)?),
                    "calibration.e_max" => e_max = Some(parse_f64(v)?),
                    "calibration.dt_cal" => {
                        c.calibration.learner.dt_cal = if v == "auto" { DtCalPolicy::SinceLastUpdate } else { DtCalPolicy::Fixed(parse_f64(v)?) }
                    }
                    "calibration.beta1" => c.calibration.learner.adam.beta1 = parse_f64(v)?,
                    "calibration.beta2" => c.calibration.learner.adam.beta2 = parse_f64(v)?,
                    "calibration.epsilon" => c.calibration.learner.adam.epsilon = parse_f64(v)?,
                    "calibration.lambda_bias" => c.calibration.learner.adam.lambda_bias = parse_f64(v)?,
                    "calibration.lambda_gain" => c.calibration.learner.adam.lambda_gain = parse_f64(v)?,
                    "calibration.lambda_align" => c.calibration.learner.adam.lambda_align = parse_f64(v)?,
                    "calibration.learn_bias" => c.calibration.learner.learn_bias = parse_bool(v)?,
                    "calibration.learn_gain" => c.calibration.learner.learn_gain = parse_bool(v)?,
                    "calibration.learn_alignment" => c.calibration.learner.learn_alignment = parse_bool(v)?,
                    "calibration.alignment_gradient" => {
                        c.calibration.learner.alignment_gradient = match v {
                            "printed" => AlignmentGradient::Printed,
                            "exact" => AlignmentGradient::Exact,
                            _ => return Err(format!("expected printed or exact, got {v:?}")),
                        }
                    }
                    "calibration.temp_min" => c.calibration.temp_scale.min = parse_f64(v)?,
                    "calibration.temp_max" => c.calibration.temp_scale.max = parse_f64(v)?,
                    "calibration.trace_every" => c.calibration.trace_every = parse_int(v)?,
                    "sim.trajectory" => {
                        c.sim.trajectory = match v {
                            "steady" => TrajectoryChoice::Steady,
                            "harmonic_roll" => TrajectoryChoice::HarmonicRoll,
                            "piecewise_random" => TrajectoryChoice::PiecewiseRandom,
                            _ => return Err(format!("unknown trajectory {v:?}")),
                        }
                    }
                    "sim.duration" => c.sim.duration = parse_f64(v)?,
                    "sim.angles_deg" => {
                        let a = parse_vec3(v)?;
                        c.sim.angles = EulerAngles::from_degrees(a.x, a.y, a.z);
                    }
                    "sim.amplitude_deg" => c.sim.amplitude = d(parse_f64(v)?),
                    "sim.freq" => c.sim.freq = parse_f64(v)?,
                    "sim.max_rate_dps" => c.sim.max_rate = d(parse_f64(v)?),
                    "sim.knot_interval" => c.sim.knot_interval = parse_f64(v)?,
                    "sim.traj_seed" => c.sim.traj_seed = Some(parse_int(v)?),
                    "sim.gyro_rms_dps" => c.sim.gyro_rms = d(parse_f64(v)?),
                    "sim.gyro_bias_dps" => c.sim.gyro_bias = parse_vec3(v)?.map(d),
                    "sim.accel_rms" => c.sim.accel_rms = parse_f64(v)?,
                    "sim.mag_rms" => c.sim.mag_rms = parse_f64(v)?,
                    "sim.gravity" => c.sim.gravity = parse_f64(v)?,
                    "sim.inclination_deg" => c.sim.inclination = d(parse_f64(v)?),
                    "sim.temperature" => c.sim.temperature = parse_f64(v)?,
                    "sim.temperature_end" => c.sim.temperature_end = Some(parse_f64(v)?),
                    "sim.defect_bias" => c.sim.defect_bias = parse_vec3(v)?,
                    "sim.defect_gain" => c.sim.defect_gain = parse_vec3(v)?,
                    "io.input" => c.input = Some(PathBuf::from(v)),
                    "io.write_stream" => c.write_stream = parse_bool(v)?,
                    "report.settle" => c.report.settle = parse_f64(v)?,
                    "report.final_window" => c.report.final_window = parse_f64(v)?,
                    "report.hold" => c.report.hold = parse_f64(v)?,
                    _ => return Err(format!("unknown key {key:?}")),
                }
                Ok(())
            })();
            r.map_err(|m| err(format!("{key}: {m}")))?;
        }
        if fixed {
            cfg.fusion.mode = GainMode::Fixed(k_fixed);
        }
        cfg.calibration.learner.full_scale = full_scale;
        cfg.calibration.learner.e_max = e_max.unwrap_or_else(|| CalibratorConfig::default_e_max(full_scale));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: String| Err(ConfigError::Invalid(m));
        if let Err(e) = self.fusion.validate() {
            return inv(e.to_string());
        }
        if let Err(e) = self.calibration.learner.validate() {
            return inv(e);
        }
        if self.calibration.poly_order > crate::calibration::MAX_POLY_ORDER {
            return inv(format!("calibration.poly_order must be ≤ 3, got {}", self.calibration.poly_order));
        }
        if self.calibration.trace_every == 0 {
            return inv("calibration.trace_every must be ≥ 1".into());
        }
        if self.mode == RunMode::Replay && self.input.is_none() {
            return inv("replay needs io.input".into());
        }
        if self.mode == RunMode::Simulate {
            if let Err(e) = self.sim_config().and_then(|s| s.validate().map_err(|e| e.to_string())) {
                return inv(e);
            }
        }
        let r = &self.report;
        if !(r.settle >= 0.0 && r.final_window > 0.0 && r.hold > 0.0) {
            return inv("report.settle must be ≥ 0 and report.final_window, report.hold > 0".into());
        }
        Ok(())
    }

    pub fn trajectory(&self) -> Result<Trajectory, String> {
        let s = &self.sim;
        let kind = match s.trajectory {
            TrajectoryChoice::Steady => TrajectoryKind::Steady(s.angles),
            TrajectoryChoice::HarmonicRoll => TrajectoryKind::HarmonicRoll { amplitude: s.amplitude, freq: s.freq },
            TrajectoryChoice::PiecewiseRandom => TrajectoryKind::PiecewiseRandom {
                seed: s.traj_seed.unwrap_or(self.seed),
                max_rate: s.max_rate,
                knot_interval: s.knot_interval,
            },
        };
        Trajectory::new(kind, s.duration, self.fusion.gyro_rate).map_err(|e| format!("sim: {e}"))
    }

    pub fn sim_config(&self) -> Result<SimConfig, String> {
        let s = &self.sim;
        let noise = NoiseSpec {
            gyro_rms: s.gyro_rms,
            gyro_bias: s.gyro_bias,
            accel_rms: s.accel_rms,
            mag_rms: s.mag_rms,
            seed: self.seed,
        };
        let mut sim = SimConfig::new(self.trajectory()?, noise);
        sim.gravity = s.gravity;
        sim.b_ref = reference_field(s.inclination);
        sim.accel_rate = self.fusion.accel_rate;
        sim.mag_rate = self.fusion.mag_rate;
        sim.full_scale = self.calibration.learner.full_scale;
        sim.temperature = s.temperature;
        let temperature = match s.temperature_end {
            Some(end) => TemperatureProfile::Ramp { start: s.temperature, end },
            None => TemperatureProfile::Constant(s.temperature),
        };
        let has_defects = s.defect_bias != Vector3::zeros() || s.defect_gain != Vector3::zeros();
        if has_defects || s.temperature_end.is_some() {
            let mut params = CalibrationParams::zeros(0).map_err(|e| e.to_string())?;
            for i in 0..3 {
                params.bias[i][0] = s.defect_bias[i] / sim.full_scale;
                params.gain[i][0] = s.defect_gain[i];
            }
            sim.defects = Some(DefectSpec { params, temperature, temp_scale: self.calibration.temp_scale });
        }
        Ok(sim)
    }

    pub fn adam(&self) -> AdamConfig {
        self.calibration.learner.adam
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("", "empty").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let sim = cfg.sim_config().unwrap();
        assert_eq!(sim.noise.accel_rms, 1.0);
        assert!((sim.noise.gyro_rms - 0.5f64.to_radians()).abs() < 1e-15);
        assert_eq!(cfg.calibration.learner.adam, AdamConfig::default());
    }

    #[test]
    fn fixed_gain_mode() {
        let cfg = RunConfig::parse("fusion.mode = fixed\nfusion.k_fixed = 0.1\n", "t").unwrap();
        assert_eq!(cfg.fusion.mode, GainMode::Fixed(0.1));
    }

    #[test]
    fn out_of_range_gain_fails_validation() {
        let e = RunConfig::parse("fusion.mode = fixed\nfusion.k_fixed = 1.5", "t").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid(ref m) if m.contains("k_fixed")), "{e}");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = RunConfig::parse("# ok\nseed = 3\nbogus.key = 1\n", "cfg.txt").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 3, .. }), "{e}");
        assert!(e.to_string().contains("cfg.txt"));
        let e = RunConfig::parse("sim.angles_deg = 1, 2\n", "c").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 1, .. }));
        let e = RunConfig::parse("no equals sign", "c").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 1, .. }));
    }

    #[test]
    fn comments_and_vectors() {
        let text = "sim.angles_deg = 10, -20, 30  # steady pose\nsim.defect_bias = -2.52e-2, -1.19e-2, 1.26e-2\ncalibration.enabled = true\ncalibration.dt_cal = 0.01\n";
        let cfg = RunConfig::parse(text, "t").unwrap();
        assert!((cfg.sim.angles.pitch + 20f64.to_radians()).abs() < 1e-15);
        assert!(cfg.calibration.enabled);
        assert_eq!(cfg.calibration.learner.dt_cal, DtCalPolicy::Fixed(0.01));
        let sim = cfg.sim_config().unwrap();
        let d = sim.defects.unwrap();
        assert!((d.params.bias[0][0] * sim.full_scale + 2.52e-2).abs() < 1e-15);
    }

    #[test]
    fn full_scale_drives_default_e_max() {
        let cfg = RunConfig::parse("calibration.full_scale_dps = 2000", "t").unwrap();
        let fs = 2000f64.to_radians();
        assert!((cfg.calibration.learner.e_max - 0.05 * fs).abs() < 1e-15);
    }

    #[test]
    fn every_key_is_accepted() {
        let sample = |k: &str| match k {
            "fusion.mode" => "adaptive",
            "calibration.enabled" | "calibration.learn_bias" | "calibration.learn_gain"
            | "calibration.learn_alignment" | "io.write_stream" => "true",
            "calibration.dt_cal" => "auto",
            "calibration.alignment_gradient" => "exact",
            "sim.trajectory" => "harmonic_roll",
            "sim.angles_deg" | "sim.gyro_bias_dps" | "sim.defect_bias" | "sim.defect_gain" => "0, 0, 0",
            "io.input" => "x.csv",
            "calibration.beta1" | "calibration.beta2" => "0.9",
            "calibration.temp_max" => "100",
            "fusion.window" | "seed" | "sim.traj_seed" | "calibration.trace_every" => "7",
            "calibration.poly_order" => "2",
            "fusion.k_fixed" | "sim.mag_rms" => "0.1",
            "fusion.gyro_rate" => "512",
            "sim.temperature_end" => "30",
            _ => "1",
        };
        for (k, _) in KEYS {
            let text = format!("{k} = {}\n", sample(k));
            RunConfig::parse(&text, "t").unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }
}
