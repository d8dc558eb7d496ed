//! Attitude estimation by MSE-weighted fusion of gyroscope, accelerometer and
//! magnetometer data, with online gyroscope calibration driven by the fusion
//! deviations.

pub mod absolute;
pub mod attitude;
pub mod calibration;
pub mod fusion;
pub mod mse;
pub mod sim;
pub mod harness;
