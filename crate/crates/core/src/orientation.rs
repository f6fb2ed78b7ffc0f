//! The whole-body orientation function `Q(q; Θ)`.
//!
//! The vector part is linear in the coefficients, `Q_xyz = Θ λ(q)`, and the
//! scalar part is the positive root of the unit-norm constraint. `Q` is the
//! WBO frame relative to the base.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisError, MonomialBasis};
use crate::centroidal::{centroidal_matrices, CentroidalError};
use crate::model::{Configuration, RobotModel};
use crate::spatial::{e_matrix, vector_rate_lift, UnitQuaternion};

/// Smallest scalar part accepted by [`WboFunction::t_matrix`].
pub const MIN_SCALAR: f64 = 0.5;
/// Margin below unit norm required of `Θ λ(q)`.
pub const NORM_MARGIN: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum WboError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Centroidal(#[from] CentroidalError),
    #[error("|Θλ(q)| = {norm} leaves the unit ball; the fit is extrapolated too far")]
    Domain { norm: f64 },
    #[error("scalar part {scalar} below {MIN_SCALAR}; outside the supported rotation range")]
    ThinDomain { scalar: f64 },
    #[error("coefficient matrix is {rows}x{cols}, expected 3x{expected}")]
    Shape { rows: usize, cols: usize, expected: usize },
}

/// Free-form provenance carried with a fitted function.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WboMetadata {
    pub model_name: String,
    pub model_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WboFunction {
    basis: MonomialBasis,
    theta: DMatrix<f64>,
    pub metadata: WboMetadata,
}

impl WboFunction {
    pub fn new(basis: MonomialBasis, theta: DMatrix<f64>) -> Result<Self, WboError> {
        if theta.nrows() != 3 || theta.ncols() != basis.len() {
            return Err(WboError::Shape { rows: theta.nrows(), cols: theta.ncols(), expected: basis.len() });
        }
        Ok(Self { basis, theta, metadata: WboMetadata::default() })
    }

    /// `Θ = 0`: the WBO frame coincides with the base.
    pub fn identity(basis: MonomialBasis) -> Self {
        let theta = DMatrix::zeros(3, basis.len());
        Self { basis, theta, metadata: WboMetadata::default() }
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn with_theta(&self, theta: DMatrix<f64>) -> Result<Self, WboError> {
        let mut out = Self::new(self.basis.clone(), theta)?;
        out.metadata = self.metadata.clone();
        Ok(out)
    }

    /// Zeroes every coefficient with magnitude below `threshold`; returns the
    /// number of nonzero coefficients left.
    pub fn prune(&mut self, threshold: f64) -> usize {
        self.theta.iter_mut().for_each(|c| {
            if c.abs() < threshold {
                *c = 0.0;
            }
        });
        self.nonzero_terms()
    }

    pub fn nonzero_terms(&self) -> usize {
        self.theta.iter().filter(|c| **c != 0.0).count()
    }

    /// `Q(q)` from precomputed features.
    pub fn quaternion_from_features(&self, features: &DVector<f64>) -> Result<UnitQuaternion, WboError> {
        let v: Vector3<f64> = (&self.theta * features).fixed_rows::<3>(0).into_owned();
        quaternion_from_vector_part(v)
    }

    /// `Q(q) = [√(1 - |Θλ|²); Θλ]`.
    pub fn eval_q(&self, q: &DVector<f64>) -> Result<UnitQuaternion, WboError> {
        self.quaternion_from_features(&self.basis.eval(q)?)
    }

    pub fn t_matrix(&self, q: &DVector<f64>) -> Result<Matrix3<f64>, WboError> {
        t_matrix_of(&self.eval_q(q)?)
    }

    /// WBO angular velocity relative to the base, in the base frame:
    /// `T_Q Θ J_λ q̇`.
    pub fn omega_wbo(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<Vector3<f64>, WboError> {
        let t = self.t_matrix(q)?;
        let j = self.basis.jacobian(q)?;
        Ok(t * (&self.theta * (j * qdot)).fixed_rows::<3>(0))
    }

    /// Approximated connection `Ã = T_Q Θ J_λ` (3 × n_q).
    pub fn approx_connection(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, WboError> {
        let t = self.t_matrix(q)?;
        let j = self.basis.jacobian(q)?;
        Ok(DMatrix::from_column_slice(3, 3, t.as_slice()) * &self.theta * j)
    }

    /// `Q_W,Wbo = Q_W,B ∘ Q_B,Wbo`.
    pub fn world_wbo(&self, cfg: &Configuration) -> Result<UnitQuaternion, WboError> {
        Ok(cfg.base_pose.orientation.compose(&self.eval_q(&cfg.q)?))
    }

    /// `H̃ = M_B (ω_B + Ω_Wbo)`, base frame.
    pub fn approx_cam(
        &self,
        model: &RobotModel,
        cfg: &Configuration,
        omega_base: &Vector3<f64>,
        qdot: &DVector<f64>,
    ) -> Result<Vector3<f64>, WboError> {
        let m = centroidal_matrices(model, cfg).map_err(CentroidalError::from)?;
        Ok(m.m_base * (omega_base + self.omega_wbo(&cfg.q, qdot)?))
    }
}

pub(crate) fn quaternion_from_vector_part(v: Vector3<f64>) -> Result<UnitQuaternion, WboError> {
    let n2 = v.norm_squared();
    if !(n2.sqrt() <= 1.0 - NORM_MARGIN) {
        return Err(WboError::Domain { norm: n2.sqrt() });
    }
    Ok(UnitQuaternion::from_positive_scalar((1.0 - n2).sqrt(), v))
}

/// `T_Q = 2 R_Q E_Q [-Q_s⁻¹ Q_xyzᵀ; I]`, mapping `d(Q_xyz)/dt` to the
/// parent-frame angular velocity.
pub fn t_matrix_of(q: &UnitQuaternion) -> Result<Matrix3<f64>, WboError> {
    if q.scalar() < MIN_SCALAR {
        return Err(WboError::ThinDomain { scalar: q.scalar() });
    }
    Ok(2.0 * q.to_rotation_matrix() * e_matrix(q) * vector_rate_lift(q))
}
