//! Adam with bias correction and one learning rate per parameter class.

use super::params::ParamClass;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lambda_bias: f64,
    pub lambda_gain: f64,
    pub lambda_align: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.999,
            beta2: 0.9999,
            epsilon: 1e-8,
            lambda_bias: 1e-6,
            lambda_gain: 1e-8,
            lambda_align: 1e-9,
        }
    }
}

impl AdamConfig {
    pub fn rate(&self, class: ParamClass) -> f64 {
        match class {
            ParamClass::Bias => self.lambda_bias,
            ParamClass::Gain => self.lambda_gain,
            ParamClass::Align => self.lambda_align,
        }
    }

    pub fn is_valid(&self) -> bool {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        unit(self.beta1)
            && unit(self.beta2)
            && self.epsilon > 0.0
            && self.lambda_bias > 0.0
            && self.lambda_gain > 0.0
            && self.lambda_align > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self { config, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// Updates the moments and returns the parameter deltas.
    pub fn step(&mut self, grads: &[f64], classes: &[ParamClass]) -> Vec<f64> {
        assert_eq!(grads.len(), self.m.len());
        assert_eq!(classes.len(), self.m.len());
        let c = self.config;
        self.t += 1;
        // powi saturates harmlessly once t exceeds i32::MAX.
        let t = self.t.min(i32::MAX as u64) as i32;
        let corr1 = 1.0 - c.beta1.powi(t);
        let corr2 = 1.0 - c.beta2.powi(t);
        let mut deltas = vec![0.0; grads.len()];
        for i in 0..grads.len() {
            let g = grads[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / corr1;
            let v_hat = self.v[i] / corr2;
            deltas[i] = -c.rate(classes[i]) * m_hat / (v_hat.sqrt() + c.epsilon);
        }
        deltas
    }
}
