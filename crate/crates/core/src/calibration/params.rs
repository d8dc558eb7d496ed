//! Calibration transfer function: per-axis gain and bias polynomials in
//! normalized temperature plus a column-normalized alignment matrix.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub const MAX_POLY_ORDER: usize = 3;

/// Row/column of each alignment off-diagonal, in storage order.
pub const ALIGN_POSITIONS: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("alignment column {column} has off-diagonal square sum {sum} (must be < 1)")]
    ColumnNorm { column: usize, sum: f64 },
    #[error("polynomial order {0} exceeds the supported maximum of {MAX_POLY_ORDER}")]
    PolyOrder(usize),
    #[error("parameter vector has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("alignment matrix is singular")]
    Singular,
}

/// One raw gyro reading in normalized units (full scale maps to ±1) with its
/// normalized temperature in [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawGyroSample {
    pub w: Vector3<f64>,
    pub temp: f64,
}

impl RawGyroSample {
    pub fn new(w: Vector3<f64>, temp: f64) -> Self {
        Self { w, temp }
    }
}

/// Affine map from a sensor temperature range onto [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureScale {
    pub min: f64,
    pub max: f64,
}

impl Default for TemperatureScale {
    fn default() -> Self {
        Self { min: -40.0, max: 85.0 }
    }
}

impl TemperatureScale {
    pub fn normalize(&self, t: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            return 0.0;
        }
        (2.0 * (t - self.min) / span - 1.0).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationParams {
    poly_order: usize,
    /// `gain[axis][k]`, the shift by one is applied when evaluating.
    pub gain: [Vec<f64>; 3],
    /// `bias[axis][k]` in normalized raw units.
    pub bias: [Vec<f64>; 3],
    /// Off-diagonals of the alignment matrix, ordered as `ALIGN_POSITIONS`.
    pub align: [f64; 6],
}

/// Which derivative of the alignment diagonal to use in the alignment gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignmentGradient {
    /// Diagonal correction term with a plus sign, as commonly published.
    #[default]
    Printed,
    /// True derivative of `√(1 − Σa²)`, which carries a minus sign.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamClass {
    Gain,
    Bias,
    Align,
}

fn poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

impl CalibrationParams {
    /// Identity calibration: all coefficients zero.
    pub fn zeros(poly_order: usize) -> Result<Self, CalibrationError> {
        if poly_order > MAX_POLY_ORDER {
            return Err(CalibrationError::PolyOrder(poly_order));
        }
        let z = vec![0.0; poly_order + 1];
        Ok(Self {
            poly_order,
            gain: [z.clone(), z.clone(), z.clone()],
            bias: [z.clone(), z.clone(), z],
            align: [0.0; 6],
        })
    }

    pub fn poly_order(&self) -> usize {
        self.poly_order
    }

    pub fn len(&self) -> usize {
        Self::len_for(self.poly_order)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn len_for(poly_order: usize) -> usize {
        6 * (poly_order + 1) + 6
    }

    pub fn gain_index(&self, axis: usize, k: usize) -> usize {
        axis * (self.poly_order + 1) + k
    }

    pub fn bias_index(&self, axis: usize, k: usize) -> usize {
        3 * (self.poly_order + 1) + axis * (self.poly_order + 1) + k
    }

    pub fn align_index(&self, i: usize) -> usize {
        6 * (self.poly_order + 1) + i
    }

    /// Flat layout: every gain coefficient, then every bias, then alignment.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for axis in &self.gain {
            v.extend_from_slice(axis);
        }
        for axis in &self.bias {
            v.extend_from_slice(axis);
        }
        v.extend_from_slice(&self.align);
        v
    }

    pub fn from_vec(poly_order: usize, v: &[f64]) -> Result<Self, CalibrationError> {
        let mut p = Self::zeros(poly_order)?;
        let expected = p.len();
        if v.len() != expected {
            return Err(CalibrationError::Length { got: v.len(), expected });
        }
        let n = poly_order + 1;
        for axis in 0..3 {
            p.gain[axis].copy_from_slice(&v[axis * n..(axis + 1) * n]);
            p.bias[axis].copy_from_slice(&v[(3 + axis) * n..(4 + axis) * n]);
        }
        p.align.copy_from_slice(&v[6 * n..]);
        Ok(p)
    }

    pub fn classes(&self) -> Vec<ParamClass> {
        let n = 3 * (self.poly_order + 1);
        let mut c = vec![ParamClass::Gain; n];
        c.extend(std::iter::repeat_n(ParamClass::Bias, n));
        c.extend([ParamClass::Align; 6]);
        c
    }

    pub fn gain_at(&self, axis: usize, temp: f64) -> f64 {
        poly(&self.gain[axis], temp)
    }

    pub fn bias_at(&self, axis: usize, temp: f64) -> f64 {
        poly(&self.bias[axis], temp)
    }

    pub fn align_at(&self, row: usize, col: usize) -> f64 {
        ALIGN_POSITIONS
            .iter()
            .position(|&p| p == (row, col))
            .map_or(0.0, |i| self.align[i])
    }

    /// Sum of squared off-diagonals in each column.
    pub fn column_off_diagonal_sums(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for (i, &(_, col)) in ALIGN_POSITIONS.iter().enumerate() {
            s[col] += self.align[i] * self.align[i];
        }
        s
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        for (column, sum) in self.column_off_diagonal_sums().into_iter().enumerate() {
            if !(sum < 1.0) {
                return Err(CalibrationError::ColumnNorm { column, sum });
            }
        }
        let all_finite = self.to_vec().iter().all(|x| x.is_finite());
        if !all_finite {
            return Err(CalibrationError::ColumnNorm { column: 0, sum: f64::NAN });
        }
        Ok(())
    }

    /// Alignment matrix with unit-norm columns.
    pub fn alignment_matrix(&self) -> Result<Matrix3<f64>, CalibrationError> {
        self.validate()?;
        let sums = self.column_off_diagonal_sums();
        let mut a = Matrix3::zeros();
        for (j, s) in sums.iter().enumerate() {
            a[(j, j)] = (1.0 - s).sqrt();
        }
        for (i, &(r, c)) in ALIGN_POSITIONS.iter().enumerate() {
            a[(r, c)] = self.align[i];
        }
        Ok(a)
    }

    fn unit_scaled(&self, raw: &RawGyroSample) -> Vector3<f64> {
        Vector3::from_fn(|i, _| {
            (self.gain_at(i, raw.temp) + 1.0) * (raw.w[i] - self.bias_at(i, raw.temp))
        })
    }
}

/// Calibrated angular rate in rad/s.
pub fn apply_calibration(
    raw: &RawGyroSample,
    p: &CalibrationParams,
    full_scale: f64,
) -> Result<Vector3<f64>, CalibrationError> {
    let a = p.alignment_matrix()?;
    Ok(full_scale * (a * p.unit_scaled(raw)))
}

/// Raw normalized reading that calibrates to `omega` (rad/s) at `temp`.
pub fn invert_calibration(
    omega: &Vector3<f64>,
    temp: f64,
    p: &CalibrationParams,
    full_scale: f64,
) -> Result<Vector3<f64>, CalibrationError> {
    let a = p.alignment_matrix()?;
    let u = a.try_inverse().ok_or(CalibrationError::Singular)? * (omega / full_scale);
    Ok(Vector3::from_fn(|i, _| {
        u[i] / (p.gain_at(i, temp) + 1.0) + p.bias_at(i, temp)
    }))
}

/// Angular-rate error implied by fusion deviations `d` accumulated over `dt_cal`.
pub fn backprop_deviation(d: &Vector3<f64>, alpha: f64, beta: f64, dt_cal: f64) -> Vector3<f64> {
    backprop_matrix(alpha, beta) * d / dt_cal
}

/// Maps Euler-angle errors to body-rate errors.
pub fn backprop_matrix(alpha: f64, beta: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Matrix3::new(1.0, 0.0, -sb, 0.0, ca, sa * cb, 0.0, -sa, ca * cb)
}

/// Maps body rates to Euler-angle rates (singular at pitch ±90°).
pub fn euler_rate_matrix(alpha: f64, beta: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let tb = sb / cb;
    Matrix3::new(1.0, sa * tb, ca * tb, 0.0, ca, -sa, 0.0, sa / cb, ca / cb)
}

/// Shrinks a deviation toward zero as its MSE approaches `e_max²`.
pub fn scale_deviation(d: f64, mse_d: f64, e_max: f64) -> f64 {
    d * (1.0 - mse_d / (e_max * e_max)).max(0.0)
}

/// Gradient of `½‖e‖²` with respect to every parameter, in the `to_vec` layout,
/// where `err` is the rate error (target minus calibrated) in rad/s.
pub fn param_gradients(
    err: &Vector3<f64>,
    raw: &RawGyroSample,
    p: &CalibrationParams,
    full_scale: f64,
    mode: AlignmentGradient,
) -> Result<Vec<f64>, CalibrationError> {
    let a = p.alignment_matrix()?;
    let mut grad = vec![0.0; p.len()];
    let t = raw.temp;
    for j in 0..3 {
        let col = a.column(j);
        let proj = -full_scale * err.dot(&col);
        let g1 = p.gain_at(j, t) + 1.0;
        let centred = raw.w[j] - p.bias_at(j, t);
        let mut tk = 1.0;
        for k in 0..=p.poly_order {
            grad[p.gain_index(j, k)] = proj * centred * tk;
            grad[p.bias_index(j, k)] = -proj * g1 * tk;
            tk *= t;
        }
    }
    let u = p.unit_scaled(raw);
    let sign = match mode {
        AlignmentGradient::Printed => 1.0,
        AlignmentGradient::Exact => -1.0,
    };
    for (i, &(r, c)) in ALIGN_POSITIONS.iter().enumerate() {
        let mut dw = Vector3::zeros();
        dw[r] = 1.0;
        dw[c] = sign * p.align[i] / a[(c, c)];
        grad[p.align_index(i)] = -full_scale * u[c] * err.dot(&dw);
    }
    Ok(grad)
}
