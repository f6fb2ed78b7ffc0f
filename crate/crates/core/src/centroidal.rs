//! Forward kinematics, centroidal angular momentum and the local connection.
//!
//! Every centroidal quantity is expressed in the base (root link) frame.
//! `M_B` maps the base angular velocity to the angular momentum about the
//! whole-body CoM, `M_q` maps joint rates, and the local connection is
//! `A = M_B⁻¹ M_q`.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, Vector3, Vector4};
use thiserror::Error;

use crate::model::{Configuration, JointKind, ModelError, RobotModel};
use crate::spatial::{hamilton, Pose, UnitQuaternion};
use crate::trajectory::JointTrajectory;

/// Largest accepted condition number of `M_B`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error)]
pub enum CentroidalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("locked inertia is singular or ill-conditioned (condition number {condition:e})")]
    SingularLockedInertia { condition: f64 },
    #[error("local connection residual {residual:e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("invalid integration window: {0}")]
    Integration(String),
}

/// Locked inertia, joint momentum matrix and CoM, all in the base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidalMatrices {
    pub m_base: Matrix3<f64>,
    pub m_joint: Matrix3xX<f64>,
    pub com: Vector3<f64>,
}

/// Joint configuration with its local connection `A(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalConnectionSample {
    pub q: DVector<f64>,
    pub a: Matrix3xX<f64>,
    /// Basis Jacobian cached by the fitting pipeline.
    pub basis_jacobian: Option<DMatrix<f64>>,
}

/// World pose of every link, indexed like `model.links`.
pub fn forward_kinematics(model: &RobotModel, cfg: &Configuration) -> Result<Vec<Pose>, ModelError> {
    model.check_dimension(&cfg.q)?;
    let mut poses = vec![Pose::identity(); model.links.len()];
    poses[model.root] = cfg.base_pose;
    for &j in model.traversal() {
        let joint = &model.joints[j];
        let value = joint.q_index.map_or(0.0, |i| cfg.q[i]);
        poses[joint.child] = poses[joint.parent].compose(&joint.transform(value));
    }
    Ok(poses)
}

fn world_com(model: &RobotModel, poses: &[Pose]) -> Vector3<f64> {
    let mut first_moment = Vector3::zeros();
    for (link, pose) in model.links.iter().zip(poses) {
        first_moment += link.inertia.mass() * pose.transform_point(&link.inertia.com());
    }
    first_moment / model.total_mass()
}

/// Angular momentum about the whole-body CoM from per-link velocities,
/// expressed in the base frame.
///
/// `omega_base` and `v_base` are the base angular velocity and the base
/// origin velocity, both in base-frame coordinates.
pub fn centroidal_momentum_oracle(
    model: &RobotModel,
    cfg: &Configuration,
    omega_base: &Vector3<f64>,
    v_base: &Vector3<f64>,
    qdot: &DVector<f64>,
) -> Result<Vector3<f64>, ModelError> {
    model.check_dimension(qdot)?;
    let poses = forward_kinematics(model, cfg)?;
    let n = model.links.len();
    let r_base = cfg.base_pose.rotation_matrix();
    let mut omega = vec![Vector3::zeros(); n];
    let mut vel = vec![Vector3::zeros(); n];
    omega[model.root] = r_base * omega_base;
    vel[model.root] = r_base * v_base;
    for &j in model.traversal() {
        let joint = &model.joints[j];
        let (p, c) = (joint.parent, joint.child);
        let mut w = omega[p];
        let mut v = vel[p] + omega[p].cross(&(poses[c].translation - poses[p].translation));
        if let Some(i) = joint.q_index {
            let frame = poses[p].compose(&joint.origin);
            let axis = frame.orientation.rotate(&joint.axis);
            match joint.kind {
                JointKind::Revolute => w += axis * qdot[i],
                JointKind::Prismatic => v += axis * qdot[i],
                JointKind::Fixed => {}
            }
        }
        omega[c] = w;
        vel[c] = v;
    }
    let com = world_com(model, &poses);
    let mut h = Vector3::zeros();
    for (i, link) in model.links.iter().enumerate() {
        let m = link.inertia.mass();
        if m == 0.0 {
            continue;
        }
        let r = poses[i].rotation_matrix();
        let c_i = poses[i].transform_point(&link.inertia.com());
        let v_ci = vel[i] + omega[i].cross(&(c_i - poses[i].translation));
        h += r * link.inertia.inertia_about_com() * r.transpose() * omega[i] + m * (c_i - com).cross(&v_ci);
    }
    Ok(r_base.transpose() * h)
}

fn parallel_axis(m: f64, r: &Vector3<f64>) -> Matrix3<f64> {
    m * (Matrix3::identity() * r.norm_squared() - r * r.transpose())
}

/// `M_B`, `M_q` and the CoM by composite subtree inertias.
pub fn centroidal_matrices(model: &RobotModel, cfg: &Configuration) -> Result<CentroidalMatrices, ModelError> {
    let poses = forward_kinematics(model, cfg)?;
    let com = world_com(model, &poses);
    let n = model.links.len();

    // per-subtree: inertia about the whole-body CoM, mass, first moment
    let mut inertia = vec![Matrix3::zeros(); n];
    let mut mass = vec![0.0; n];
    let mut moment = vec![Vector3::zeros(); n];
    for (i, link) in model.links.iter().enumerate() {
        let m = link.inertia.mass();
        if m == 0.0 {
            continue;
        }
        let r = poses[i].rotation_matrix();
        let c_i = poses[i].transform_point(&link.inertia.com());
        inertia[i] = r * link.inertia.inertia_about_com() * r.transpose() + parallel_axis(m, &(c_i - com));
        mass[i] = m;
        moment[i] = m * c_i;
    }
    for &j in model.traversal().iter().rev() {
        let (p, c) = (model.joints[j].parent, model.joints[j].child);
        let (ic, mc, hc) = (inertia[c], mass[c], moment[c]);
        inertia[p] += ic;
        mass[p] += mc;
        moment[p] += hc;
    }

    let r_base = cfg.base_pose.rotation_matrix();
    let mut m_joint = Matrix3xX::zeros(model.n_q());
    for joint in model.active_joints() {
        let i = joint.q_index.expect("active joint");
        let c = joint.child;
        let frame = poses[joint.parent].compose(&joint.origin);
        let axis = frame.orientation.rotate(&joint.axis);
        let col = if mass[c] == 0.0 {
            Vector3::zeros()
        } else {
            let offset = moment[c] / mass[c] - com;
            match joint.kind {
                JointKind::Revolute => {
                    inertia[c] * axis + mass[c] * offset.cross(&axis.cross(&(com - frame.translation)))
                }
                JointKind::Prismatic => mass[c] * offset.cross(&axis),
                JointKind::Fixed => unreachable!(),
            }
        };
        m_joint.set_column(i, &(r_base.transpose() * col));
    }
    let m_base = r_base.transpose() * inertia[model.root] * r_base;
    Ok(CentroidalMatrices {
        m_base: 0.5 * (m_base + m_base.transpose()),
        m_joint,
        com: cfg.base_pose.inverse().transform_point(&com),
    })
}

impl CentroidalMatrices {
    /// `M_B ω_B + M_q q̇`.
    pub fn momentum(&self, omega_base: &Vector3<f64>, qdot: &DVector<f64>) -> Vector3<f64> {
        self.m_base * omega_base + &self.m_joint * qdot
    }

    /// Solves `M_B A = M_q` by Cholesky, rejecting ill-conditioned `M_B`.
    pub fn connection(&self) -> Result<Matrix3xX<f64>, CentroidalError> {
        let eig = self.m_base.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(CentroidalError::SingularLockedInertia { condition });
        }
        let chol = self
            .m_base
            .cholesky()
            .ok_or(CentroidalError::SingularLockedInertia { condition })?;
        let a = chol.solve(&self.m_joint);
        let residual = (self.m_base * &a - &self.m_joint).norm();
        let scale = self.m_joint.norm();
        if residual > 1e-9 * scale {
            return Err(CentroidalError::Residual { residual });
        }
        Ok(a)
    }
}

pub fn local_connection(model: &RobotModel, cfg: &Configuration) -> Result<LocalConnectionSample, CentroidalError> {
    let a = centroidal_matrices(model, cfg)?.connection()?;
    Ok(LocalConnectionSample { q: cfg.q.clone(), a, basis_jacobian: None })
}

/// Base orientation over time under zero centroidal angular momentum:
/// `ω_B = -A(q) q̇`, integrated with fixed-step RK4 on the quaternion and
/// renormalized after each step. Returns `steps + 1` samples.
pub fn reconstruct_base_orientation<T: JointTrajectory + ?Sized>(
    model: &RobotModel,
    trajectory: &T,
    initial: UnitQuaternion,
    steps: usize,
) -> Result<Vec<(f64, UnitQuaternion)>, CentroidalError> {
    let (t0, t1) = trajectory.span();
    if steps == 0 || !(t1 > t0) {
        return Err(CentroidalError::Integration(format!("span [{t0}, {t1}] with {steps} steps")));
    }
    if trajectory.dim() != model.n_q() {
        return Err(ModelError::Dimension { expected: model.n_q(), got: trajectory.dim() }.into());
    }
    let h = (t1 - t0) / steps as f64;
    let rate = |t: f64, q: &Vector4<f64>| -> Result<Vector4<f64>, CentroidalError> {
        let (joints, joint_rates) = trajectory.state(t);
        let sample = local_connection(model, &Configuration::at_identity(joints))?;
        let omega = -(sample.a * joint_rates);
        let (s, v) = hamilton(q[0], &Vector3::new(q[1], q[2], q[3]), 0.0, &omega);
        Ok(0.5 * Vector4::new(s, v.x, v.y, v.z))
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut q = initial.as_vector4();
    out.push((t0, initial));
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = rate(t, &q)?;
        let k2 = rate(t + 0.5 * h, &(q + 0.5 * h * k1))?;
        let k3 = rate(t + 0.5 * h, &(q + 0.5 * h * k2))?;
        let k4 = rate(t + h, &(q + h * k3))?;
        q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        q /= q.norm();
        let t_next = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
        out.push((t_next, UnitQuaternion::from_vector4(&q).expect("normalized")));
    }
    Ok(out)
}
