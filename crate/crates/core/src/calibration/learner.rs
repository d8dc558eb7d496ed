//! Online calibrator: turns fusion deviations into gyro calibration updates.

use nalgebra::Vector3;

use super::adam::{AdamConfig, OptimizerState};
use super::params::{
    apply_calibration, backprop_deviation, param_gradients, scale_deviation, AlignmentGradient,
    CalibrationError, CalibrationParams, ParamClass, RawGyroSample,
};

/// How the calibration period used to turn deviations into rates is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtCalPolicy {
    /// Time elapsed since the last tick that carried usable deviations.
    SinceLastUpdate,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratorConfig {
    /// Raw full scale in rad/s; normalized raw ±1 maps to ±full_scale.
    pub full_scale: f64,
    /// Largest deviation RMS still used for learning, rad.
    pub e_max: f64,
    pub dt_cal: DtCalPolicy,
    pub adam: AdamConfig,
    pub learn_bias: bool,
    pub learn_gain: bool,
    pub learn_alignment: bool,
    pub alignment_gradient: AlignmentGradient,
}

/// 500 °/s, a common MEMS gyro range.
pub const DEFAULT_FULL_SCALE: f64 = 500.0 * std::f64::consts::PI / 180.0;

impl CalibratorConfig {
    /// 5 % of full scale per second, taken over a one second window.
    pub fn default_e_max(full_scale: f64) -> f64 {
        0.05 * full_scale
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.full_scale > 0.0) {
            return Err(format!("calibration.full_scale must be > 0, got {}", self.full_scale));
        }
        if !(self.e_max > 0.0) {
            return Err(format!("calibration.e_max must be > 0, got {}", self.e_max));
        }
        if let DtCalPolicy::Fixed(p) = self.dt_cal {
            if !(p > 0.0) {
                return Err(format!("calibration.dt_cal must be > 0, got {p}"));
            }
        }
        if !self.adam.is_valid() {
            return Err("calibration: Adam betas must lie in (0, 1) and rates be > 0".into());
        }
        Ok(())
    }
}

impl Default for CalibratorConfig {
    fn default() -> Self {
        Self {
            full_scale: DEFAULT_FULL_SCALE,
            e_max: Self::default_e_max(DEFAULT_FULL_SCALE),
            dt_cal: DtCalPolicy::SinceLastUpdate,
            adam: AdamConfig::default(),
            learn_bias: true,
            learn_gain: true,
            learn_alignment: false,
            alignment_gradient: AlignmentGradient::Printed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTickInput {
    pub deviations: [f64; 3],
    pub deviation_mse: [f64; 3],
    /// Fused roll and pitch, rad.
    pub alpha: f64,
    pub beta: f64,
    /// Time since the previous tick, s.
    pub elapsed: f64,
    pub raw: RawGyroSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickOutcome {
    /// Every scaled deviation was zero; nothing changed.
    Gated,
    Updated,
    /// The update broke the alignment column norm and was undone.
    Rejected,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CalibrationDiagnostics {
    pub ticks: u64,
    pub updates: u64,
    pub gated: u64,
    pub rejected: u64,
    /// Norm of the last back-propagated rate error, rad/s.
    pub last_error_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OnlineCalibrator {
    cfg: CalibratorConfig,
    params: CalibrationParams,
    optimizer: OptimizerState,
    classes: Vec<ParamClass>,
    since_update: f64,
    diagnostics: CalibrationDiagnostics,
}

impl OnlineCalibrator {
    pub fn new(cfg: CalibratorConfig, params: CalibrationParams) -> Result<Self, CalibrationError> {
        params.validate()?;
        let optimizer = OptimizerState::new(cfg.adam, params.len());
        Ok(Self::with_optimizer(cfg, params, optimizer))
    }

    /// Resumes from a saved optimizer state (moments must match the parameter layout).
    pub fn with_optimizer(
        cfg: CalibratorConfig,
        params: CalibrationParams,
        mut optimizer: OptimizerState,
    ) -> Self {
        optimizer.config = cfg.adam;
        let classes = params.classes();
        Self {
            cfg,
            params,
            optimizer,
            classes,
            since_update: 0.0,
            diagnostics: CalibrationDiagnostics::default(),
        }
    }

    pub fn config(&self) -> &CalibratorConfig {
        &self.cfg
    }

    pub fn params(&self) -> &CalibrationParams {
        &self.params
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn diagnostics(&self) -> CalibrationDiagnostics {
        self.diagnostics
    }

    /// Calibrated rate for a raw sample under the current parameters.
    pub fn calibrate(&self, raw: &RawGyroSample) -> Vector3<f64> {
        // Parameters are validated on every accepted update.
        apply_calibration(raw, &self.params, self.cfg.full_scale)
            .expect("calibrator parameters are kept valid")
    }

    fn enabled(&self, class: ParamClass) -> bool {
        match class {
            ParamClass::Bias => self.cfg.learn_bias,
            ParamClass::Gain => self.cfg.learn_gain,
            ParamClass::Align => self.cfg.learn_alignment,
        }
    }

    pub fn tick(&mut self, input: &CalibrationTickInput) -> TickOutcome {
        self.diagnostics.ticks += 1;
        self.since_update += input.elapsed;

        let d = Vector3::from_fn(|i, _| {
            scale_deviation(input.deviations[i], input.deviation_mse[i], self.cfg.e_max)
        });
        if d.iter().all(|&x| x == 0.0) {
            self.diagnostics.gated += 1;
            return TickOutcome::Gated;
        }
        let dt_cal = match self.cfg.dt_cal {
            DtCalPolicy::SinceLastUpdate => self.since_update,
            DtCalPolicy::Fixed(p) => p,
        };
        self.since_update = 0.0;
        if !(dt_cal > 0.0) {
            self.diagnostics.gated += 1;
            return TickOutcome::Gated;
        }

        let err = backprop_deviation(&d, input.alpha, input.beta, dt_cal);
        self.diagnostics.last_error_norm = err.norm();
        let mut grads = match param_gradients(
            &err,
            &input.raw,
            &self.params,
            self.cfg.full_scale,
            self.cfg.alignment_gradient,
        ) {
            Ok(g) => g,
            Err(_) => {
                self.diagnostics.rejected += 1;
                return TickOutcome::Rejected;
            }
        };
        for (g, &c) in grads.iter_mut().zip(&self.classes) {
            if !self.enabled(c) {
                *g = 0.0;
            }
        }

        let prior_opt = self.optimizer.clone();
        let deltas = self.optimizer.step(&grads, &self.classes);
        let mut v = self.params.to_vec();
        for ((x, dx), &c) in v.iter_mut().zip(&deltas).zip(&self.classes) {
            if self.enabled(c) {
                *x += dx;
            }
        }
        let candidate = CalibrationParams::from_vec(self.params.poly_order(), &v)
            .expect("layout is preserved");
        if candidate.validate().is_err() {
            log::warn!("calibration update rejected: alignment column norm violated");
            self.optimizer = prior_opt;
            self.diagnostics.rejected += 1;
            return TickOutcome::Rejected;
        }
        self.params = candidate;
        self.diagnostics.updates += 1;
        TickOutcome::Updated
    }
}
