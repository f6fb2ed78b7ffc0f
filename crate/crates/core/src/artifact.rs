//! On-disk formats: the coefficient artifact, the fit report and the
//! evaluation report, plus the trajectory evaluation behind them.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::basis::{BasisDescriptor, BasisError, MonomialBasis};
use crate::centroidal::{centroidal_matrices, CentroidalError};
use crate::fit::{FitReport, FitSettings, FitStatus};
use crate::model::{Configuration, RobotModel};
use crate::orientation::{WboError, WboFunction, WboMetadata};
use crate::spatial::Pose;
use crate::trajectory::SampledTrajectory;
use crate::TOOL_VERSION;

pub const THETA_FORMAT: &str = "wbo-theta/1";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported artifact format `{0}`")]
    Format(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("coefficient table has {got} entries, expected {expected}")]
    Size { expected: usize, got: usize },
    #[error(transparent)]
    Wbo(#[from] WboError),
    #[error(transparent)]
    Centroidal(#[from] CentroidalError),
    #[error("trajectory has {got} joints, model has {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRef {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub rows: usize,
    pub cols: usize,
    pub row_major: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaArtifact {
    pub format: String,
    pub tool_version: String,
    pub model: ModelRef,
    pub basis: BasisDescriptor,
    pub theta: CoefficientTable,
    pub settings: FitSettings,
    pub prune_threshold: f64,
    pub status: FitStatus,
}

impl ThetaArtifact {
    pub fn new(wbo: &WboFunction, settings: &FitSettings, status: FitStatus) -> Self {
        let t = wbo.theta();
        let row_major = (0..t.nrows()).flat_map(|r| (0..t.ncols()).map(move |c| t[(r, c)])).collect();
        Self {
            format: THETA_FORMAT.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            model: ModelRef { name: wbo.metadata.model_name.clone(), sha256: wbo.metadata.model_hash.clone() },
            basis: wbo.basis().descriptor(),
            theta: CoefficientTable { rows: t.nrows(), cols: t.ncols(), row_major },
            settings: settings.clone(),
            prune_threshold: settings.prune_threshold,
            status,
        }
    }

    pub fn to_wbo(&self) -> Result<WboFunction, ArtifactError> {
        if self.format != THETA_FORMAT {
            return Err(ArtifactError::Format(self.format.clone()));
        }
        let basis = MonomialBasis::from_descriptor(&self.basis)?;
        let t = &self.theta;
        if t.rows != 3 || t.cols != basis.len() || t.row_major.len() != 3 * basis.len() {
            return Err(ArtifactError::Size { expected: 3 * basis.len(), got: t.row_major.len() });
        }
        let theta = DMatrix::from_row_slice(t.rows, t.cols, &t.row_major);
        let mut wbo = WboFunction::new(basis, theta)?;
        wbo.metadata = WboMetadata { model_name: self.model.name.clone(), model_hash: self.model.sha256.clone() };
        Ok(wbo)
    }

    pub fn to_json(&self) -> Result<String, ArtifactError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &[u8]) -> Result<Self, ArtifactError> {
        Ok(serde_json::from_slice(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReportFile {
    pub tool_version: String,
    pub model: ModelRef,
    pub report: FitReport,
}

/// Error summary over one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub model_sha256: String,
    pub theta_sha256: String,
    pub trajectory_sha256: String,
    /// Per-axis mean `|A q̇ − Ã q̇|`, rad/s.
    pub velocity_mae: [f64; 3],
    /// Per-axis mean `|H − H̃|`, kg·m²/s.
    pub cam_mae: [f64; 3],
    pub n_samples: usize,
    pub span: [f64; 2],
}

/// Per-time-step comparison, all in the base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub t: f64,
    pub aq: [f64; 3],
    pub approx_aq: [f64; 3],
    pub cam: [f64; 3],
    pub approx_cam: [f64; 3],
}

pub const EVAL_CSV_HEADER: [&str; 13] = [
    "t", "aqd_x", "aqd_y", "aqd_z", "approx_aqd_x", "approx_aqd_y", "approx_aqd_z", "h_x", "h_y", "h_z", "approx_h_x",
    "approx_h_y", "approx_h_z",
];

/// Compares `A q̇` with `Ã q̇` and `H` with `H̃` at every sample. Missing
/// base angular velocity is taken as zero.
pub fn evaluate_trajectory(
    model: &RobotModel,
    wbo: &WboFunction,
    trajectory: &SampledTrajectory,
) -> Result<(Vec<EvalRow>, [f64; 3], [f64; 3]), ArtifactError> {
    let samples = trajectory.samples();
    if samples[0].q.len() != model.n_q() {
        return Err(ArtifactError::Dimension { expected: model.n_q(), got: samples[0].q.len() });
    }
    let mut rows = Vec::with_capacity(samples.len());
    let mut vel = [0.0; 3];
    let mut cam = [0.0; 3];
    for s in samples {
        let pose = Pose::from_rotation(s.base_orientation.unwrap_or_default());
        let cfg = Configuration::new(pose, s.q.clone());
        let m = centroidal_matrices(model, &cfg).map_err(CentroidalError::from)?;
        let a = m.connection()?;
        let aq: Vector3<f64> = a * &s.qdot;
        let approx: Vector3<f64> = wbo.omega_wbo(&s.q, &s.qdot)?;
        let wb = s.base_angular_velocity.unwrap_or_default();
        let h = m.m_base * (wb + aq);
        let h_approx = m.m_base * (wb + approx);
        for k in 0..3 {
            vel[k] += (aq[k] - approx[k]).abs();
            cam[k] += (h[k] - h_approx[k]).abs();
        }
        rows.push(EvalRow { t: s.t, aq: aq.into(), approx_aq: approx.into(), cam: h.into(), approx_cam: h_approx.into() });
    }
    let n = samples.len() as f64;
    Ok((rows, vel.map(|v| v / n), cam.map(|v| v / n)))
}

pub fn write_eval_csv<W: std::io::Write>(rows: &[EvalRow], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVAL_CSV_HEADER)?;
    for r in rows {
        let vals = std::iter::once(r.t).chain(r.aq).chain(r.approx_aq).chain(r.cam).chain(r.approx_cam);
        w.write_record(vals.map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
