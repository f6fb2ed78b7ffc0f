//! Joint-space trajectories and the trajectory CSV format.
//!
//! CSV header: `t, q_0..q_{n-1}, qd_0..qd_{n-1}` optionally followed by base
//! columns `base_qw, base_qx, base_qy, base_qz` (base orientation in the
//! world) and `wb_x, wb_y, wb_z` (base angular velocity, base frame).

use std::io::Read;

use nalgebra::{DVector, Vector3};
use thiserror::Error;

use crate::spatial::UnitQuaternion;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("time stamps must be strictly increasing (row {row}: {prev} -> {next})")]
    NonMonotone { row: usize, prev: f64, next: f64 },
    #[error("trajectory needs at least two samples")]
    TooShort,
    #[error("inconsistent dimensions: {0}")]
    Dimension(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

/// A joint path `q(t)` with its rate `q̇(t)` on a closed time interval.
pub trait JointTrajectory {
    fn dim(&self) -> usize;
    fn span(&self) -> (f64, f64);
    fn state(&self, t: f64) -> (DVector<f64>, DVector<f64>);
}

/// Closure-backed trajectory.
pub struct FnTrajectory<F> {
    dim: usize,
    span: (f64, f64),
    f: F,
}

impl<F> FnTrajectory<F>
where
    F: Fn(f64) -> (DVector<f64>, DVector<f64>),
{
    pub fn new(dim: usize, span: (f64, f64), f: F) -> Self {
        Self { dim, span, f }
    }
}

impl<F> JointTrajectory for FnTrajectory<F>
where
    F: Fn(f64) -> (DVector<f64>, DVector<f64>),
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn span(&self) -> (f64, f64) {
        self.span
    }
    fn state(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        (self.f)(t)
    }
}

/// Straight segments between waypoints, each traversed in `segment_time`
/// with a smoothstep profile so the rate vanishes at every waypoint.
#[derive(Debug, Clone)]
pub struct WaypointPath {
    points: Vec<DVector<f64>>,
    segment_time: f64,
}

impl WaypointPath {
    pub fn new(points: Vec<DVector<f64>>, segment_time: f64) -> Result<Self, TrajectoryError> {
        if points.len() < 2 {
            return Err(TrajectoryError::TooShort);
        }
        let n = points[0].len();
        if points.iter().any(|p| p.len() != n) {
            return Err(TrajectoryError::Dimension("waypoints differ in length".into()));
        }
        Ok(Self { points, segment_time })
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }
}

impl JointTrajectory for WaypointPath {
    fn dim(&self) -> usize {
        self.points[0].len()
    }
    fn span(&self) -> (f64, f64) {
        (0.0, self.segment_time * self.segments() as f64)
    }
    fn state(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let u = (t / self.segment_time).clamp(0.0, self.segments() as f64);
        let k = (u.floor() as usize).min(self.segments() - 1);
        let tau = u - k as f64;
        let (a, b) = (&self.points[k], &self.points[k + 1]);
        let s = tau * tau * (3.0 - 2.0 * tau);
        let ds = 6.0 * tau * (1.0 - tau) / self.segment_time;
        (a + (b - a) * s, (b - a) * ds)
    }
}

/// One trajectory row with optional base data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub base_orientation: Option<UnitQuaternion>,
    pub base_angular_velocity: Option<Vector3<f64>>,
}

/// Time-sorted samples, interpolated with cubic Hermite splines on `(q, q̇)`.
#[derive(Debug, Clone)]
pub struct SampledTrajectory {
    samples: Vec<TrajectorySample>,
}

impl SampledTrajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self, TrajectoryError> {
        if samples.len() < 2 {
            return Err(TrajectoryError::TooShort);
        }
        let n = samples[0].q.len();
        for (i, s) in samples.iter().enumerate() {
            if s.q.len() != n || s.qdot.len() != n {
                return Err(TrajectoryError::Dimension(format!("row {i} has mismatched q/qd lengths")));
            }
            if i > 0 && !(s.t > samples[i - 1].t) {
                return Err(TrajectoryError::NonMonotone { row: i, prev: samples[i - 1].t, next: s.t });
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    /// Reads the CSV format described in the module docs.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, TrajectoryError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let layout = CsvLayout::from_headers(&headers)?;
        let mut samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| TrajectoryError::Row { row, message: e.to_string() })?;
            if vals.len() != headers.len() {
                return Err(TrajectoryError::Row { row, message: "wrong field count".into() });
            }
            let n = layout.n_q;
            let base_orientation = match layout.base_q {
                Some(i) => Some(
                    UnitQuaternion::new_normalize(vals[i], vals[i + 1], vals[i + 2], vals[i + 3])
                        .map_err(|e| TrajectoryError::Row { row, message: e.to_string() })?,
                ),
                None => None,
            };
            samples.push(TrajectorySample {
                t: vals[0],
                q: DVector::from_column_slice(&vals[1..1 + n]),
                qdot: DVector::from_column_slice(&vals[1 + n..1 + 2 * n]),
                base_orientation,
                base_angular_velocity: layout.base_w.map(|i| Vector3::new(vals[i], vals[i + 1], vals[i + 2])),
            });
        }
        Self::new(samples)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), TrajectoryError> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.dim();
        let first = &self.samples[0];
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("q_{i}")));
        header.extend((0..n).map(|i| format!("qd_{i}")));
        if first.base_orientation.is_some() {
            header.extend(["base_qw", "base_qx", "base_qy", "base_qz"].map(String::from));
        }
        if first.base_angular_velocity.is_some() {
            header.extend(["wb_x", "wb_y", "wb_z"].map(String::from));
        }
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.t];
            row.extend(s.q.iter());
            row.extend(s.qdot.iter());
            if let Some(b) = s.base_orientation {
                row.extend(b.as_vector4().iter());
            }
            if let Some(wb) = s.base_angular_velocity {
                row.extend(wb.iter());
            }
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| TrajectoryError::Csv(e.into()))?;
        Ok(())
    }
}

struct CsvLayout {
    n_q: usize,
    base_q: Option<usize>,
    base_w: Option<usize>,
}

impl CsvLayout {
    fn from_headers(h: &[String]) -> Result<Self, TrajectoryError> {
        if h.first().map(String::as_str) != Some("t") {
            return Err(TrajectoryError::Header("first column must be `t`".into()));
        }
        let n_q = h.iter().filter(|c| c.starts_with("q_")).count();
        for i in 0..n_q {
            if h.get(1 + i) != Some(&format!("q_{i}")) || h.get(1 + n_q + i) != Some(&format!("qd_{i}")) {
                return Err(TrajectoryError::Header(format!("expected q_{i} and qd_{i} in order")));
            }
        }
        let mut idx = 1 + 2 * n_q;
        let mut base_q = None;
        let mut base_w = None;
        if h.get(idx).map(String::as_str) == Some("base_qw") {
            let want = ["base_qw", "base_qx", "base_qy", "base_qz"];
            if h.get(idx..idx + 4).is_none_or(|s| s.iter().zip(want).any(|(a, b)| a != b)) {
                return Err(TrajectoryError::Header("incomplete base orientation columns".into()));
            }
            base_q = Some(idx);
            idx += 4;
        }
        if h.get(idx).map(String::as_str) == Some("wb_x") {
            let want = ["wb_x", "wb_y", "wb_z"];
            if h.get(idx..idx + 3).is_none_or(|s| s.iter().zip(want).any(|(a, b)| a != b)) {
                return Err(TrajectoryError::Header("incomplete base angular velocity columns".into()));
            }
            base_w = Some(idx);
            idx += 3;
        }
        if idx != h.len() {
            return Err(TrajectoryError::Header(format!("unexpected column `{}`", h[idx])));
        }
        Ok(Self { n_q, base_q, base_w })
    }
}

impl JointTrajectory for SampledTrajectory {
    fn dim(&self) -> usize {
        self.samples[0].q.len()
    }

    fn span(&self) -> (f64, f64) {
        (self.samples[0].t, self.samples[self.samples.len() - 1].t)
    }

    fn state(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let s = &self.samples;
        let k = match s.partition_point(|x| x.t <= t) {
            0 => 0,
            i if i >= s.len() => s.len() - 2,
            i => i - 1,
        };
        let (a, b) = (&s[k], &s[k + 1]);
        let h = b.t - a.t;
        let u = ((t - a.t) / h).clamp(0.0, 1.0);
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let q = &a.q * h00 + &a.qdot * (h10 * h) + &b.q * h01 + &b.qdot * (h11 * h);
        let d00 = (6.0 * u2 - 6.0 * u) / h;
        let d10 = 3.0 * u2 - 4.0 * u + 1.0;
        let d01 = (-6.0 * u2 + 6.0 * u) / h;
        let d11 = 3.0 * u2 - 2.0 * u;
        let qdot = &a.q * d00 + &a.qdot * d10 + &b.q * d01 + &b.qdot * d11;
        (q, qdot)
    }
}
