//! Run statistics: tracking error, convergence, gains, timing and the learned
//! calibration.

use std::fmt::Write as _;

/// First time the error enters the band `threshold` and stays there for
/// `hold` seconds. `None` if it never does.
pub fn convergence_time(t: &[f64], err: &[f64], threshold: f64, hold: f64) -> Option<f64> {
    let mut start: Option<f64> = None;
    for (&ti, &e) in t.iter().zip(err) {
        if e.abs() < threshold {
            let s = *start.get_or_insert(ti);
            if ti - s >= hold {
                return Some(s);
            }
        } else {
            start = None;
        }
    }
    None
}

pub fn rms(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x * x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSummary {
    /// Learned zeroth-order bias, rad/s.
    pub bias: [f64; 3],
    pub gain: [f64; 3],
    pub align: [f64; 6],
    pub updates: u64,
    pub gated: u64,
    pub rejected: u64,
    /// `|learned − injected|` as a percentage of full scale, when the truth is known.
    pub bias_error_pct_fs: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub samples: usize,
    pub duration: f64,
    /// Per-angle RMS error after the settling time, degrees.
    pub rms_deg: Option<[f64; 3]>,
    pub max_abs_deg: Option<[f64; 3]>,
    /// Roll convergence time from the first sample, ms.
    pub convergence_ms: Option<f64>,
    /// Mean gain over fused steps after the settling time.
    pub mean_gains: [f64; 3],
    pub ms_per_sample: f64,
    pub calibration: Option<CalibrationSummary>,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl MetricsReport {
    /// Machine-readable `key = value` lines. Timing is left out so that
    /// identical runs give identical files.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "duration_s = {:?}", self.duration);
        if let Some(r) = self.rms_deg {
            let _ = writeln!(s, "rms_deg = {}", join(&r));
        }
        if let Some(r) = self.max_abs_deg {
            let _ = writeln!(s, "max_abs_deg = {}", join(&r));
        }
        if let Some(c) = self.convergence_ms {
            let _ = writeln!(s, "convergence_ms = {c:?}");
        }
        let _ = writeln!(s, "mean_gains = {}", join(&self.mean_gains));
        if let Some(c) = &self.calibration {
            let _ = writeln!(s, "cal.bias_rad_s = {}", join(&c.bias));
            let _ = writeln!(s, "cal.gain = {}", join(&c.gain));
            let _ = writeln!(s, "cal.align = {}", join(&c.align));
            let _ = writeln!(s, "cal.updates = {}", c.updates);
            let _ = writeln!(s, "cal.gated = {}", c.gated);
            let _ = writeln!(s, "cal.rejected = {}", c.rejected);
            if let Some(e) = c.bias_error_pct_fs {
                let _ = writeln!(s, "cal.bias_error_pct_fs = {}", join(&e));
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples            {}  ({:.3} s)", self.samples, self.duration);
        match self.rms_deg {
            Some(r) => {
                let _ = writeln!(s, "RMS error [deg]    roll {:.4}  pitch {:.4}  yaw {:.4}", r[0], r[1], r[2]);
            }
            None => {
                let _ = writeln!(s, "RMS error [deg]    n/a (no ground truth after settling)");
            }
        }
        if let Some(m) = self.max_abs_deg {
            let _ = writeln!(s, "max error [deg]    roll {:.4}  pitch {:.4}  yaw {:.4}", m[0], m[1], m[2]);
        }
        match self.convergence_ms {
            Some(c) => {
                let _ = writeln!(s, "roll convergence   {c:.1} ms");
            }
            None if self.rms_deg.is_some() || self.max_abs_deg.is_some() => {
                let _ = writeln!(s, "roll convergence   not reached");
            }
            None => {}
        }
        let g = self.mean_gains;
        let _ = writeln!(s, "mean gain          roll {:.4}  pitch {:.4}  yaw {:.4}", g[0], g[1], g[2]);
        let _ = writeln!(s, "execution time     {:.5} ms/sample", self.ms_per_sample);
        if let Some(c) = &self.calibration {
            let b = c.bias;
            let _ = writeln!(s, "learned bias       {:.5e}  {:.5e}  {:.5e} rad/s", b[0], b[1], b[2]);
            let g = c.gain;
            let _ = writeln!(s, "learned gain       {:.5e}  {:.5e}  {:.5e}", g[0], g[1], g[2]);
            if let Some(e) = c.bias_error_pct_fs {
                let _ = writeln!(s, "bias error [% FS]  {:.4}  {:.4}  {:.4}", e[0], e[1], e[2]);
            }
            let _ = writeln!(s, "updates            {} (gated {}, rejected {})", c.updates, c.gated, c.rejected);
        }
        s
    }
}
