//! Drives a sensor stream through fusion and, optionally, online calibration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use thiserror::Error;

use super::config::{ConfigError, RunConfig, RunMode};
use super::csvio::{ingest_csv, CsvError, StreamRow, StreamWriter};
use super::metrics::{convergence_time, rms, CalibrationSummary, MetricsReport};
use crate::absolute::{AccelReading, MagReading};
use crate::attitude::{wrap_angle_difference, EulerAngles, GyroIncrement};
use crate::calibration::{
    write_snapshot, CalibrationError, CalibrationParams, CalibrationTickInput, OnlineCalibrator,
    RawGyroSample, Snapshot, TemperatureScale, TickOutcome,
};
use crate::fusion::{FusionEngine, FusionOutput};
use crate::sim::{generate_stream, SensorSample, SimError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("{path}: {msg}")]
    Output { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub output: FusionOutput,
    pub tick: Option<TickOutcome>,
    /// Wrapped estimate minus truth, rad.
    pub error: Option<[f64; 3]>,
}

/// Incremental experiment loop. Feed samples in time order with `step`, then
/// read the statistics with `report`.
#[derive(Debug, Clone)]
pub struct Runner {
    engine: FusionEngine,
    calibrator: Option<OnlineCalibrator>,
    full_scale: f64,
    temp_scale: TemperatureScale,
    nominal_dt: f64,
    prev_t: Option<f64>,
    t0: f64,
    settle: f64,
    final_window: f64,
    hold: f64,
    times: Vec<f64>,
    errors: Vec<[f64; 3]>,
    gain_sum: [f64; 3],
    gain_n: [u64; 3],
    samples: usize,
    busy: std::time::Duration,
    injected_bias: Option<Vector3<f64>>,
}

impl Runner {
    pub fn new(cfg: &RunConfig) -> Result<Self, RunError> {
        let engine = FusionEngine::new(cfg.fusion.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let cal = &cfg.calibration;
        let calibrator = if cal.enabled {
            Some(OnlineCalibrator::new(cal.learner.clone(), CalibrationParams::zeros(cal.poly_order)?)?)
        } else {
            None
        };
        Ok(Self {
            engine,
            calibrator,
            full_scale: cal.learner.full_scale,
            temp_scale: cal.temp_scale,
            nominal_dt: 1.0 / cfg.fusion.gyro_rate,
            prev_t: None,
            t0: 0.0,
            settle: cfg.report.settle,
            final_window: cfg.report.final_window,
            hold: cfg.report.hold,
            times: Vec::new(),
            errors: Vec::new(),
            gain_sum: [0.0; 3],
            gain_n: [0; 3],
            samples: 0,
            busy: std::time::Duration::ZERO,
            injected_bias: None,
        })
    }

    /// Known raw-channel bias (rad/s) to score the learned bias against.
    pub fn set_injected_bias(&mut self, bias: Vector3<f64>) {
        self.injected_bias = Some(bias);
    }

    pub fn engine(&self) -> &FusionEngine {
        &self.engine
    }

    pub fn calibrator(&self) -> Option<&OnlineCalibrator> {
        self.calibrator.as_ref()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Per-sample errors (rad) for samples that carried ground truth.
    pub fn errors(&self) -> &[[f64; 3]] {
        &self.errors
    }

    pub fn step(&mut self, s: &SensorSample, truth: Option<&EulerAngles>) -> StepRecord {
        let dt = match self.prev_t {
            Some(p) => s.t - p,
            None => {
                self.t0 = s.t;
                self.nominal_dt
            }
        };
        self.prev_t = Some(s.t);

        let start = Instant::now();
        let raw = RawGyroSample::new(s.gyro / self.full_scale, self.temp_scale.normalize(s.temp));
        let rate = match &self.calibrator {
            Some(c) => c.calibrate(&raw),
            None => s.gyro,
        };
        let accel = s.accel.map(AccelReading);
        let mag = s.mag.map(MagReading);
        let out = self.engine.step(&GyroIncrement::from_rate(&rate, dt), accel.as_ref(), mag.as_ref());
        let tick = self.calibrator.as_mut().map(|c| {
            c.tick(&CalibrationTickInput {
                deviations: out.deviations,
                deviation_mse: out.deviation_mse,
                alpha: out.angles.roll,
                beta: out.angles.pitch,
                elapsed: dt,
                raw,
            })
        });
        self.busy += start.elapsed();
        self.samples += 1;

        let rel_t = s.t - self.t0;
        if rel_t >= self.settle {
            for i in 0..3 {
                if out.fused[i] {
                    self.gain_sum[i] += out.gains[i];
                    self.gain_n[i] += 1;
                }
            }
        }
        let error = truth.map(|tr| {
            let e = out.angles.as_array();
            let w = tr.as_array();
            let err = std::array::from_fn(|i| wrap_angle_difference(e[i], w[i]));
            self.times.push(rel_t);
            self.errors.push(err);
            err
        });
        StepRecord { t: s.t, output: out, tick, error }
    }

    pub fn report(&self) -> MetricsReport {
        let duration = self.prev_t.map_or(0.0, |t| t - self.t0);
        let (rms_deg, max_abs_deg, convergence_ms) = if self.errors.is_empty() {
            (None, None, None)
        } else {
            let settled: Vec<&[f64; 3]> = self
                .times
                .iter()
                .zip(&self.errors)
                .filter(|(t, _)| **t >= self.settle)
                .map(|(_, e)| e)
                .collect();
            let (r, m) = if settled.is_empty() {
                (None, None)
            } else {
                let r = std::array::from_fn(|i| rms(settled.iter().map(|e| e[i])).to_degrees());
                let m = std::array::from_fn(|i| {
                    settled.iter().fold(0.0f64, |acc, e| acc.max(e[i].abs())).to_degrees()
                });
                (Some(r), Some(m))
            };
            let end = *self.times.last().unwrap_or(&0.0);
            let final_rms = rms(self
                .times
                .iter()
                .zip(&self.errors)
                .filter(|(t, _)| **t >= end - self.final_window)
                .map(|(_, e)| e[0]));
            let roll: Vec<f64> = self.errors.iter().map(|e| e[0]).collect();
            let conv = convergence_time(&self.times, &roll, 2.0 * final_rms, self.hold).map(|t| t * 1e3);
            (r, m, conv)
        };
        let mean_gains = std::array::from_fn(|i| {
            if self.gain_n[i] == 0 {
                0.0
            } else {
                self.gain_sum[i] / self.gain_n[i] as f64
            }
        });
        let calibration = self.calibrator.as_ref().map(|c| {
            let p = c.params();
            let d = c.diagnostics();
            let bias: [f64; 3] = std::array::from_fn(|i| p.bias[i][0] * self.full_scale);
            CalibrationSummary {
                bias,
                gain: std::array::from_fn(|i| p.gain[i][0]),
                align: p.align,
                updates: d.updates,
                gated: d.gated,
                rejected: d.rejected,
                bias_error_pct_fs: self.injected_bias.map(|b| {
                    std::array::from_fn(|i| 100.0 * (bias[i] - b[i]).abs() / self.full_scale)
                }),
            }
        });
        MetricsReport {
            samples: self.samples,
            duration,
            rms_deg,
            max_abs_deg,
            convergence_ms,
            mean_gains,
            ms_per_sample: if self.samples == 0 {
                0.0
            } else {
                self.busy.as_secs_f64() * 1e3 / self.samples as f64
            },
            calibration,
        }
    }
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Output { path: path.display().to_string(), msg: e.to_string() }
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(|e| out_err(path, e))
}

const ESTIMATE_HEADER: &str = "t,alpha,beta,gamma,mse_a,mse_b,mse_g,Ka,Kb,Kg,da,db,dg";

fn estimate_line(rec: &StepRecord) -> String {
    let o = &rec.output;
    let d = |x: f64| x.to_degrees();
    let d2 = |x: f64| x.to_degrees().to_degrees();
    let a = o.angles.as_array();
    let m = o.angle_mse.as_array();
    let mut cols = vec![format!("{:?}", rec.t)];
    cols.extend(a.iter().map(|&x| format!("{:?}", d(x))));
    cols.extend(m.iter().map(|&x| format!("{:?}", d2(x))));
    cols.extend(o.gains.iter().map(|x| format!("{x:?}")));
    cols.extend(o.deviations.iter().map(|&x| format!("{:?}", d(x))));
    cols.join(",")
}

fn trace_header(order: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for kind in ["gain", "bias"] {
        for axis in ["x", "y", "z"] {
            for k in 0..=order {
                cols.push(format!("{kind}_{axis}{k}"));
            }
        }
    }
    cols.extend(["a12", "a13", "a21", "a23", "a31", "a32", "updates", "gated", "rejected"].map(String::from));
    cols.join(",")
}

fn trace_line(t: f64, c: &OnlineCalibrator) -> String {
    let d = c.diagnostics();
    let mut cols = vec![format!("{t:?}")];
    cols.extend(c.params().to_vec().iter().map(|x| format!("{x:?}")));
    cols.extend([d.updates, d.gated, d.rejected].map(|x| x.to_string()));
    cols.join(",")
}

/// Runs the configured experiment and writes its outputs into `out_dir`:
/// `estimates.csv`, `report.txt`, `metrics.kv`, plus `stream.csv` for
/// simulations and `calibration_trace.csv` / `calibration.snapshot` when
/// learning.
pub fn run_experiment(cfg: &RunConfig, out_dir: &Path) -> Result<MetricsReport, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| out_err(out_dir, e))?;
    let mut runner = Runner::new(cfg)?;

    let est_path = out_dir.join("estimates.csv");
    let mut est = create(&est_path)?;
    writeln!(est, "{ESTIMATE_HEADER}").map_err(|e| out_err(&est_path, e))?;

    let trace_path = out_dir.join("calibration_trace.csv");
    let mut trace = if cfg.calibration.enabled {
        let mut w = create(&trace_path)?;
        writeln!(w, "{}", trace_header(cfg.calibration.poly_order)).map_err(|e| out_err(&trace_path, e))?;
        Some(w)
    } else {
        None
    };

    let stream_path = out_dir.join("stream.csv");
    let mut stream = None;
    let sim = match cfg.mode {
        RunMode::Simulate => {
            let sim = cfg.sim_config().map_err(ConfigError::Invalid)?;
            if let Some(d) = &sim.defects {
                runner.set_injected_bias(Vector3::from_fn(|i, _| d.params.bias[i][0] * sim.full_scale));
            }
            if cfg.write_stream {
                stream = Some(StreamWriter::new(create(&stream_path)?, true).map_err(|e| out_err(&stream_path, e))?);
            }
            Some(sim)
        }
        RunMode::Replay => None,
    };

    let every = cfg.calibration.trace_every;
    let mut index = 0usize;
    let mut handle = |row: StreamRow| -> Result<(), RunError> {
        if let Some(w) = stream.as_mut() {
            w.write(&row).map_err(|e| out_err(&stream_path, e))?;
        }
        let rec = runner.step(&row.sample, row.truth.as_ref());
        writeln!(est, "{}", estimate_line(&rec)).map_err(|e| out_err(&est_path, e))?;
        if let (Some(w), Some(c)) = (trace.as_mut(), runner.calibrator()) {
            if index % every == 0 {
                writeln!(w, "{}", trace_line(rec.t, c)).map_err(|e| out_err(&trace_path, e))?;
            }
        }
        index += 1;
        Ok(())
    };
    match &sim {
        Some(sim) => {
            for r in generate_stream(sim)? {
                handle(StreamRow { sample: r.sample, truth: Some(r.truth.angles) })?;
            }
        }
        None => {
            let path = cfg.input.as_ref().expect("validated");
            for row in ingest_csv(path)? {
                handle(row)?;
            }
        }
    }
    est.flush().map_err(|e| out_err(&est_path, e))?;
    if let Some(w) = stream {
        w.finish().map_err(|e| out_err(&stream_path, e))?;
    }
    if let Some(mut w) = trace {
        w.flush().map_err(|e| out_err(&trace_path, e))?;
    }

    let report = runner.report();
    let write = |name: &str, text: &str| {
        let p = out_dir.join(name);
        std::fs::write(&p, text).map_err(|e| out_err(&p, e))
    };
    write("metrics.kv", &report.to_kv())?;
    write("report.txt", &report.to_text())?;
    if let Some(c) = runner.calibrator() {
        let snap = Snapshot { params: c.params().clone(), optimizer: c.optimizer().clone() };
        write("calibration.snapshot", &write_snapshot(&snap))?;
    }
    Ok(report)
}
