//! Sensor stream CSV: `t,wx,wy,wz,ax,ay,az,bx,by,bz,temp`, optionally followed
//! by ground-truth `roll,pitch,yaw` in radians. Empty accelerometer or
//! magnetometer fields mark the sensor as absent for that row.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::attitude::EulerAngles;
use crate::sim::SensorSample;

pub const STREAM_HEADER: [&str; 11] = ["t", "wx", "wy", "wz", "ax", "ay", "az", "bx", "by", "bz", "temp"];
pub const TRUTH_HEADER: [&str; 3] = ["roll", "pitch", "yaw"];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: header must start with {expected}, got {got}")]
    Header { path: String, expected: String, got: String },
    #[error("{path}: row {row}: {msg}")]
    Row { path: String, row: usize, msg: String },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamRow {
    pub sample: SensorSample,
    pub truth: Option<EulerAngles>,
}

fn optional_vec(fields: &[&str]) -> Result<Option<Vector3<f64>>, String> {
    if fields.iter().all(|f| f.trim().is_empty()) {
        return Ok(None);
    }
    let mut v = Vector3::zeros();
    for (i, f) in fields.iter().enumerate() {
        v[i] = f.trim().parse::<f64>().map_err(|_| format!("bad number {f:?}"))?;
    }
    Ok(Some(v))
}

fn number(f: &str) -> Result<f64, String> {
    f.trim().parse::<f64>().map_err(|_| format!("bad number {f:?}"))
}

/// Parses a stream from any reader; `origin` names the source in errors.
pub fn read_stream<R: Read>(reader: R, origin: &str) -> Result<Vec<StreamRow>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| CsvError::Csv { path: origin.into(), source })?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let with_truth = names.len() == 14 && names[11..] == TRUTH_HEADER;
    if names.len() < 11 || names[..11] != STREAM_HEADER || !(names.len() == 11 || with_truth) {
        return Err(CsvError::Header {
            path: origin.into(),
            expected: STREAM_HEADER.join(","),
            got: names.join(","),
        });
    }
    let mut out = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, rec) in rdr.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = i + 2;
        let rec = rec.map_err(|source| CsvError::Csv { path: origin.into(), source })?;
        let f: Vec<&str> = rec.iter().collect();
        let parsed = (|| -> Result<StreamRow, String> {
            let t = number(f[0])?;
            if !t.is_finite() {
                return Err("timestamp must be finite".into());
            }
            if t <= last_t {
                return Err(format!("timestamp {t} does not increase (previous {last_t})"));
            }
            let gyro = optional_vec(&f[1..4])?.ok_or("gyro fields are required")?;
            let accel = optional_vec(&f[4..7])?;
            let mag = optional_vec(&f[7..10])?;
            let temp = number(f[10])?;
            let truth = if with_truth {
                optional_vec(&f[11..14])?.map(|v| EulerAngles::new(v.x, v.y, v.z))
            } else {
                None
            };
            Ok(StreamRow { sample: SensorSample { t, gyro, accel, mag, temp }, truth })
        })();
        let r = parsed.map_err(|msg| CsvError::Row { path: origin.into(), row, msg })?;
        last_t = r.sample.t;
        out.push(r);
    }
    Ok(out)
}

pub fn ingest_csv(path: &Path) -> Result<Vec<StreamRow>, CsvError> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| CsvError::Io { path: name.clone(), source })?;
    read_stream(std::io::BufReader::new(file), &name)
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// Streams rows to CSV with exact float round-trip.
pub struct StreamWriter<W: Write> {
    inner: csv::Writer<W>,
    with_truth: bool,
}

impl<W: Write> StreamWriter<W> {
    pub fn new(w: W, with_truth: bool) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = STREAM_HEADER.to_vec();
        if with_truth {
            header.extend(TRUTH_HEADER);
        }
        inner.write_record(&header)?;
        Ok(Self { inner, with_truth })
    }

    pub fn write(&mut self, row: &StreamRow) -> csv::Result<()> {
        let s = &row.sample;
        let vec3 = |v: Option<Vector3<f64>>| match v {
            Some(v) => [fmt(v.x), fmt(v.y), fmt(v.z)],
            None => [String::new(), String::new(), String::new()],
        };
        let mut rec = vec![fmt(s.t)];
        rec.extend(vec3(Some(s.gyro)));
        rec.extend(vec3(s.accel));
        rec.extend(vec3(s.mag));
        rec.push(fmt(s.temp));
        if self.with_truth {
            rec.extend(vec3(row.truth.map(|a| Vector3::new(a.roll, a.pitch, a.yaw))));
        }
        self.inner.write_record(&rec)
    }

    pub fn finish(mut self) -> csv::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error().into())
    }
}
