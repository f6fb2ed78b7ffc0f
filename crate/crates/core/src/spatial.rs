//! Quaternion and rigid-body algebra.
//!
//! Conventions: Hamilton product, scalar-first storage, passive rotations.
//! A quaternion `Q_ab` maps vectors expressed in frame `b` (child) into frame
//! `a` (parent): `v_a = R(Q_ab) v_b`.

use nalgebra::{Matrix3, Matrix3x4, Matrix4x3, Vector3, Vector4};
use thiserror::Error;

/// Unit-norm tolerance accepted by the checked constructors.
pub const UNIT_TOL: f64 = 1e-9;
/// Tangency tolerance for quaternion rates.
pub const TANGENT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("quaternion norm {norm} is not unit (tolerance {UNIT_TOL})")]
    NonUnitQuaternion { norm: f64 },
    #[error("quaternion is zero or non-finite")]
    DegenerateQuaternion,
    #[error("quaternion rate is not tangent to Q (Q·Qdot = {dot})")]
    NonTangentRate { dot: f64 },
    #[error("invalid spatial inertia: {0}")]
    BadInertia(String),
}

/// Unit quaternion `[s; x, y, z]` with a canonical sign.
///
/// The scalar part is kept non-negative when it is not (numerically) zero;
/// otherwise the first nonzero vector component is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    s: f64,
    v: Vector3<f64>,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self { s: 1.0, v: Vector3::zeros() }
    }

    /// Normalizes and canonicalizes arbitrary (nonzero, finite) components.
    pub fn new_normalize(s: f64, x: f64, y: f64, z: f64) -> Result<Self, SpatialError> {
        let n = (s * s + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < f64::MIN_POSITIVE {
            return Err(SpatialError::DegenerateQuaternion);
        }
        Ok(Self::canonical(s / n, Vector3::new(x / n, y / n, z / n)))
    }

    /// Accepts components that are already unit within [`UNIT_TOL`], then
    /// renormalizes them to machine precision.
    pub fn from_components(s: f64, x: f64, y: f64, z: f64) -> Result<Self, SpatialError> {
        let n = (s * s + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
            return Err(SpatialError::NonUnitQuaternion { norm: n });
        }
        Self::new_normalize(s, x, y, z)
    }

    pub fn from_vector4(q: &Vector4<f64>) -> Result<Self, SpatialError> {
        Self::from_components(q[0], q[1], q[2], q[3])
    }

    /// Rotation by `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n < f64::MIN_POSITIVE || angle == 0.0 {
            return Self::identity();
        }
        let half = 0.5 * angle;
        let v = axis * (half.sin() / n);
        Self::canonical(half.cos(), v)
    }

    /// Builds from a rotation matrix (Shepperd's method).
    pub fn from_rotation_matrix(r: &Matrix3<f64>) -> Self {
        let tr = r.trace();
        let (s, x, y, z);
        if tr > r[(0, 0)] && tr > r[(1, 1)] && tr > r[(2, 2)] {
            let k = 2.0 * (1.0 + tr).sqrt();
            s = 0.25 * k;
            x = (r[(2, 1)] - r[(1, 2)]) / k;
            y = (r[(0, 2)] - r[(2, 0)]) / k;
            z = (r[(1, 0)] - r[(0, 1)]) / k;
        } else if r[(0, 0)] >= r[(1, 1)] && r[(0, 0)] >= r[(2, 2)] {
            let k = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
            s = (r[(2, 1)] - r[(1, 2)]) / k;
            x = 0.25 * k;
            y = (r[(0, 1)] + r[(1, 0)]) / k;
            z = (r[(0, 2)] + r[(2, 0)]) / k;
        } else if r[(1, 1)] >= r[(2, 2)] {
            let k = 2.0 * (1.0 - r[(0, 0)] + r[(1, 1)] - r[(2, 2)]).sqrt();
            s = (r[(0, 2)] - r[(2, 0)]) / k;
            x = (r[(0, 1)] + r[(1, 0)]) / k;
            y = 0.25 * k;
            z = (r[(1, 2)] + r[(2, 1)]) / k;
        } else {
            let k = 2.0 * (1.0 - r[(0, 0)] - r[(1, 1)] + r[(2, 2)]).sqrt();
            s = (r[(1, 0)] - r[(0, 1)]) / k;
            x = (r[(0, 2)] + r[(2, 0)]) / k;
            y = (r[(1, 2)] + r[(2, 1)]) / k;
            z = 0.25 * k;
        }
        Self::new_normalize(s, x, y, z).expect("rotation matrix yields a nonzero quaternion")
    }

    /// Unit-norm value with a positive scalar part, skipping canonicalization
    /// checks. Used where the scalar part is constructed non-negative.
    pub(crate) fn from_positive_scalar(s: f64, v: Vector3<f64>) -> Self {
        Self { s, v }
    }

    fn canonical(s: f64, v: Vector3<f64>) -> Self {
        let flip = if s.abs() > 1e-9 {
            s < 0.0
        } else {
            v.iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
        };
        if flip {
            Self { s: -s, v: -v }
        } else {
            Self { s, v }
        }
    }

    pub fn scalar(&self) -> f64 {
        self.s
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.v
    }

    pub fn as_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.s, self.v.x, self.v.y, self.v.z)
    }

    pub fn norm(&self) -> f64 {
        (self.s * self.s + self.v.norm_squared()).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self::canonical(self.s, -self.v)
    }

    /// Hamilton product `self ∘ other`, renormalized.
    pub fn compose(&self, other: &Self) -> Self {
        let (s, v) = hamilton(self.s, &self.v, other.s, &other.v);
        // Renormalize only once rounding drift is visible, so exact products
        // (e.g. with the identity) stay bit-identical.
        if (s * s + v.norm_squared() - 1.0).abs() <= 1e-14 {
            return Self::canonical(s, v);
        }
        Self::new_normalize(s, v.x, v.y, v.z).expect("product of unit quaternions is nonzero")
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.s, self.v.x, self.v.y, self.v.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    pub fn rotate(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.to_rotation_matrix() * p
    }

    /// Rotation angle about `+z` of the intrinsic ZYX (yaw-pitch-roll)
    /// decomposition.
    pub fn yaw(&self) -> f64 {
        let (w, x, y, z) = (self.s, self.v.x, self.v.y, self.v.z);
        (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
    }
}

/// Raw Hamilton product on (scalar, vector) pairs.
pub(crate) fn hamilton(a: f64, av: &Vector3<f64>, b: f64, bv: &Vector3<f64>) -> (f64, Vector3<f64>) {
    (a * b - av.dot(bv), bv * a + av * b + av.cross(bv))
}

pub fn quat_compose(q_ab: &UnitQuaternion, q_bc: &UnitQuaternion) -> UnitQuaternion {
    q_ab.compose(q_bc)
}

/// `E_Q` such that the child-frame angular velocity is `2 E_Q Q̇`.
///
/// Row layout `[-v | s I - [v]x]`; rows are orthonormal and orthogonal to `Q`.
pub fn e_matrix(q: &UnitQuaternion) -> Matrix3x4<f64> {
    let (s, v) = (q.s, q.v);
    Matrix3x4::new(
        -v.x, s, v.z, -v.y, //
        -v.y, -v.z, s, v.x, //
        -v.z, v.y, -v.x, s,
    )
}

/// Angular velocity of the child frame relative to the parent, expressed in
/// the parent frame: `2 R_Q E_Q Q̇`.
pub fn quat_rate_to_angular_velocity(
    q: &UnitQuaternion,
    qdot: &Vector4<f64>,
) -> Result<Vector3<f64>, SpatialError> {
    let n = q.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(SpatialError::NonUnitQuaternion { norm: n });
    }
    let dot = q.as_vector4().dot(qdot);
    if dot.abs() > TANGENT_TOL {
        return Err(SpatialError::NonTangentRate { dot });
    }
    Ok(2.0 * q.to_rotation_matrix() * e_matrix(q) * qdot)
}

/// Quaternion rate produced by a child-frame (body) angular velocity:
/// `Q̇ = ½ Q ∘ [0; ω_body]`.
pub fn body_rate_to_quat_rate(q: &UnitQuaternion, omega_body: &Vector3<f64>) -> Vector4<f64> {
    0.5 * e_matrix(q).transpose() * omega_body
}

/// Maps the vector-part rate `d(Q_xyz)/dt` to the full rate `Q̇` using the
/// unit-norm constraint (`Q̇_s = -Q_s⁻¹ Q_xyz·Q̇_xyz`).
pub fn vector_rate_lift(q: &UnitQuaternion) -> Matrix4x3<f64> {
    let mut p = Matrix4x3::zeros();
    let inv_s = 1.0 / q.s;
    for j in 0..3 {
        p[(0, j)] = -inv_s * q.v[j];
        p[(j + 1, j)] = 1.0;
    }
    p
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rigid transform: orientation of the child frame and its origin, both
/// expressed in the parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub orientation: UnitQuaternion,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(orientation: UnitQuaternion, translation: Vector3<f64>) -> Self {
        Self { orientation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self { orientation: UnitQuaternion::identity(), translation }
    }

    pub fn from_rotation(orientation: UnitQuaternion) -> Self {
        Self { orientation, translation: Vector3::zeros() }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix()
    }

    /// `self ∘ other`: pose of `other`'s child in `self`'s parent frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            orientation: self.orientation.compose(&other.orientation),
            translation: self.translation + self.orientation.rotate(&other.translation),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.conjugate();
        Pose { orientation: inv, translation: -inv.rotate(&self.translation) }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.translation + self.orientation.rotate(p)
    }
}

/// Mass properties of one link, expressed in the link frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialInertia {
    mass: f64,
    com: Vector3<f64>,
    inertia: Matrix3<f64>,
}

impl SpatialInertia {
    /// Validates and builds. A zero mass is accepted only with a zero
    /// rotational inertia (massless link).
    pub fn new(mass: f64, com: Vector3<f64>, inertia: Matrix3<f64>) -> Result<Self, SpatialError> {
        if !mass.is_finite() || mass < 0.0 {
            return Err(SpatialError::BadInertia(format!("mass {mass} must be finite and positive")));
        }
        if com.iter().chain(inertia.iter()).any(|x| !x.is_finite()) {
            return Err(SpatialError::BadInertia("non-finite entry".into()));
        }
        let asym = (inertia - inertia.transpose()).abs().max();
        if asym > 1e-12 * inertia.abs().max().max(1.0) {
            return Err(SpatialError::BadInertia(format!("inertia not symmetric ({asym:e})")));
        }
        let inertia = 0.5 * (inertia + inertia.transpose());
        if mass == 0.0 {
            if inertia.abs().max() != 0.0 {
                return Err(SpatialError::BadInertia("massless link carries rotational inertia".into()));
            }
            return Ok(Self { mass, com, inertia });
        }
        let eig = inertia.symmetric_eigenvalues();
        let scale = eig.abs().max().max(f64::MIN_POSITIVE);
        let tol = 1e-9 * scale;
        if eig.min() < -tol {
            return Err(SpatialError::BadInertia(format!(
                "inertia not positive semidefinite (min eigenvalue {:e})",
                eig.min()
            )));
        }
        for i in 0..3 {
            let (a, b, c) = (eig[i], eig[(i + 1) % 3], eig[(i + 2) % 3]);
            if a + b < c - tol {
                return Err(SpatialError::BadInertia(format!(
                    "principal moments violate triangle inequality ({a}, {b}, {c})"
                )));
            }
        }
        Ok(Self { mass, com, inertia })
    }

    /// Inertia from the six unique entries `(xx, yy, zz, xy, xz, yz)`.
    pub fn from_entries(mass: f64, com: Vector3<f64>, e: [f64; 6]) -> Result<Self, SpatialError> {
        let [xx, yy, zz, xy, xz, yz] = e;
        Self::new(mass, com, Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz))
    }

    pub fn massless() -> Self {
        Self { mass: 0.0, com: Vector3::zeros(), inertia: Matrix3::zeros() }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn com(&self) -> Vector3<f64> {
        self.com
    }

    pub fn inertia_about_com(&self) -> Matrix3<f64> {
        self.inertia
    }
}
