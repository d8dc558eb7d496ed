//! Online gyroscope calibration learned from fusion deviations.

mod adam;
mod learner;
mod params;
mod snapshot;

pub use adam::{AdamConfig, OptimizerState};
pub use learner::{
    CalibrationDiagnostics, CalibrationTickInput, CalibratorConfig, DtCalPolicy, OnlineCalibrator,
    TickOutcome, DEFAULT_FULL_SCALE,
};
pub use params::{
    apply_calibration, backprop_deviation, backprop_matrix, euler_rate_matrix, invert_calibration,
    param_gradients, scale_deviation, AlignmentGradient, CalibrationError, CalibrationParams,
    ParamClass, RawGyroSample, TemperatureScale, ALIGN_POSITIONS, MAX_POLY_ORDER,
};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SnapshotError};
