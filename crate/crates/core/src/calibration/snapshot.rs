//! Flat `key = value` snapshot of calibration parameters and optimizer state.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::adam::{AdamConfig, OptimizerState};
use super::params::{CalibrationError, CalibrationParams};

const AXES: [char; 3] = ['x', 'y', 'z'];
const ALIGN_KEYS: [&str; 6] = ["a12", "a13", "a21", "a23", "a31", "a32"];

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing key {0}")]
    Missing(String),
    #[error("unknown key {0}")]
    Unknown(String),
    #[error(transparent)]
    Params(#[from] CalibrationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub params: CalibrationParams,
    pub optimizer: OptimizerState,
}

pub fn write_snapshot(s: &Snapshot) -> String {
    let p = &s.params;
    let mut out = String::new();
    let _ = writeln!(out, "poly_order = {}", p.poly_order());
    for (a, name) in AXES.iter().enumerate() {
        for (k, v) in p.gain[a].iter().enumerate() {
            let _ = writeln!(out, "gain.{name}.{k} = {v:?}");
        }
    }
    for (a, name) in AXES.iter().enumerate() {
        for (k, v) in p.bias[a].iter().enumerate() {
            let _ = writeln!(out, "bias.{name}.{k} = {v:?}");
        }
    }
    for (key, v) in ALIGN_KEYS.iter().zip(&p.align) {
        let _ = writeln!(out, "align.{key} = {v:?}");
    }
    let _ = writeln!(out, "adam.t = {}", s.optimizer.t);
    for (i, (m, v)) in s.optimizer.m.iter().zip(&s.optimizer.v).enumerate() {
        let _ = writeln!(out, "adam.m.{i} = {m:?}");
        let _ = writeln!(out, "adam.v.{i} = {v:?}");
    }
    out
}

fn parse_lines(text: &str) -> Result<BTreeMap<String, String>, SnapshotError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| SnapshotError::Syntax {
            line: i + 1,
            msg: "expected key = value".into(),
        })?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(SnapshotError::Syntax { line: i + 1, msg: format!("duplicate key {}", k.trim()) });
        }
    }
    Ok(map)
}

fn take<T: std::str::FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<T, SnapshotError> {
    let v = map.remove(key).ok_or_else(|| SnapshotError::Missing(key.into()))?;
    v.parse().map_err(|_| SnapshotError::Syntax { line: 0, msg: format!("bad value for {key}: {v}") })
}

/// Parses a snapshot; the optimizer gets `adam` as its hyperparameters.
pub fn read_snapshot(text: &str, adam: AdamConfig) -> Result<Snapshot, SnapshotError> {
    let mut map = parse_lines(text)?;
    let order: usize = take(&mut map, "poly_order")?;
    let mut params = CalibrationParams::zeros(order)?;
    for (a, name) in AXES.iter().enumerate() {
        for k in 0..=order {
            params.gain[a][k] = take(&mut map, &format!("gain.{name}.{k}"))?;
            params.bias[a][k] = take(&mut map, &format!("bias.{name}.{k}"))?;
        }
    }
    for (i, key) in ALIGN_KEYS.iter().enumerate() {
        params.align[i] = take(&mut map, &format!("align.{key}"))?;
    }
    params.validate()?;
    let mut optimizer = OptimizerState::new(adam, params.len());
    optimizer.t = take(&mut map, "adam.t")?;
    for i in 0..params.len() {
        optimizer.m[i] = take(&mut map, &format!("adam.m.{i}"))?;
        optimizer.v[i] = take(&mut map, &format!("adam.v.{i}"))?;
    }
    if let Some(k) = map.keys().next() {
        return Err(SnapshotError::Unknown(k.clone()));
    }
    Ok(Snapshot { params, optimizer })
}
