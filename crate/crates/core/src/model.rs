//! Floating-base kinematic trees: file format, validation, joint locking,
//! and configuration sampling.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spatial::{Pose, SpatialError, SpatialInertia, UnitQuaternion};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("model syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("joint `{joint}` references unknown link `{link}`")]
    UnknownLink { joint: String, link: String },
    #[error("kinematic cycle detected through link `{link}`")]
    Cycle { link: String },
    #[error("link `{link}` is not connected to the root")]
    Unreachable { link: String },
    #[error("link `{link}` has more than one parent joint")]
    MultipleParents { link: String },
    #[error("joint `{joint}` axis has norm {norm}, expected 1")]
    NonUnitAxis { joint: String, norm: f64 },
    #[error("link `{link}`: {source}")]
    BadInertia { link: String, source: SpatialError },
    #[error("joint `{joint}` has invalid limits [{lower}, {upper}]")]
    BadLimits { joint: String, lower: f64, upper: f64 },
    #[error("joint `{joint}`: {message}")]
    BadJoint { joint: String, message: String },
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("total mass must be positive")]
    ZeroMass,
    #[error("mirror table: {0}")]
    BadMirror(String),
    #[error("mirrored sampling requested but the model has no mirror table")]
    NoMirror,
    #[error("configuration has {got} joint values, model has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    pub kind: JointKind,
    /// Unit axis in the joint frame (zero for fixed joints).
    pub axis: Vector3<f64>,
    /// Joint frame in the parent link frame.
    pub origin: Pose,
    pub limits: [f64; 2],
    /// Value used when the joint is locked.
    pub neutral: f64,
    /// Index into the configuration vector (`None` for fixed joints).
    pub q_index: Option<usize>,
}

impl Joint {
    /// Child link frame in the parent link frame at joint value `value`.
    pub fn transform(&self, value: f64) -> Pose {
        let motion = match self.kind {
            JointKind::Revolute => Pose::from_rotation(UnitQuaternion::from_axis_angle(&self.axis, value)),
            JointKind::Prismatic => Pose::from_translation(self.axis * value),
            JointKind::Fixed => return self.origin,
        };
        self.origin.compose(&motion)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub inertia: SpatialInertia,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MirrorEntry {
    /// `q[a] <- sign * q[b]`, `q[b] <- sign * q[a]`.
    Pair { a: usize, b: usize, sign: i8 },
    /// `q[j] <- sign * q[j]`.
    Single { joint: usize, sign: i8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub root: usize,
    /// Mirror entries over configuration indices.
    pub mirror: Option<Vec<MirrorEntry>>,
    /// Joint indices ordered parent-before-child.
    traversal: Vec<usize>,
    /// Joint whose child is each link (`None` for the root).
    parent_joint: Vec<Option<usize>>,
    n_q: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub base_pose: Pose,
    pub q: DVector<f64>,
}

impl Configuration {
    pub fn new(base_pose: Pose, q: DVector<f64>) -> Self {
        Self { base_pose, q }
    }

    pub fn at_identity(q: DVector<f64>) -> Self {
        Self { base_pose: Pose::identity(), q }
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub name: Option<String>,
    pub root: String,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub mirror: Option<MirrorSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub name: String,
    pub mass: f64,
    #[serde(default)]
    pub com: [f64; 3],
    /// `(xx, yy, zz, xy, xz, yz)` about the link CoM.
    pub inertia: [f64; 6],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OriginSpec {
    #[serde(default)]
    pub xyz: [f64; 3],
    /// Scalar-first quaternion.
    #[serde(default = "identity_wxyz")]
    pub quat: [f64; 4],
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl Default for OriginSpec {
    fn default() -> Self {
        Self { xyz: [0.0; 3], quat: identity_wxyz() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub child: String,
    pub kind: JointKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default)]
    pub origin: OriginSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neutral: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorSpec {
    #[serde(default)]
    pub pairs: Vec<MirrorPairSpec>,
    #[serde(default, rename = "self")]
    pub singles: Vec<MirrorSelfSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorPairSpec {
    pub a: String,
    pub b: String,
    pub sign: i8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorSelfSpec {
    pub joint: String,
    pub sign: i8,
}

/// Parses and validates a JSON model document.
pub fn parse_model(text: &[u8]) -> Result<RobotModel, ModelError> {
    let file: ModelFile = serde_json::from_slice(text).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    RobotModel::from_file(&file)
}

impl RobotModel {
    /// Reads and parses a model file from disk.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .map_err(|e| ModelError::Io { path: path.display().to_string(), message: e.to_string() })?;
        parse_model(&bytes)
    }

    pub fn from_file(file: &ModelFile) -> Result<Self, ModelError> {
        let mut link_index = HashMap::new();
        let mut links = Vec::with_capacity(file.links.len());
        for spec in &file.links {
            if link_index.insert(spec.name.clone(), links.len()).is_some() {
                return Err(ModelError::Duplicate(spec.name.clone()));
            }
            let inertia = SpatialInertia::from_entries(spec.mass, Vector3::from(spec.com), spec.inertia)
                .map_err(|source| ModelError::BadInertia { link: spec.name.clone(), source })?;
            links.push(Link { name: spec.name.clone(), inertia });
        }
        let root = *link_index.get(&file.root).ok_or_else(|| ModelError::UnknownLink {
            joint: "<root>".into(),
            link: file.root.clone(),
        })?;

        let mut joints = Vec::with_capacity(file.joints.len());
        let mut joint_names = HashMap::new();
        let mut n_q = 0;
        for spec in &file.joints {
            if joint_names.insert(spec.name.clone(), joints.len()).is_some() {
                return Err(ModelError::Duplicate(spec.name.clone()));
            }
            let lookup = |link: &String| {
                link_index.get(link).copied().ok_or_else(|| ModelError::UnknownLink {
                    joint: spec.name.clone(),
                    link: link.clone(),
                })
            };
            let parent = lookup(&spec.parent)?;
            let child = lookup(&spec.child)?;
            let [w, x, y, z] = spec.origin.quat;
            let rot = UnitQuaternion::from_components(w, x, y, z).map_err(|e| ModelError::BadJoint {
                joint: spec.name.clone(),
                message: format!("origin rotation: {e}"),
            })?;
            let origin = Pose::new(rot, Vector3::from(spec.origin.xyz));
            let joint = match spec.kind {
                JointKind::Fixed => {
                    if spec.axis.is_some() || spec.limits.is_some() {
                        return Err(ModelError::BadJoint {
                            joint: spec.name.clone(),
                            message: "fixed joints carry no axis or limits".into(),
                        });
                    }
                    Joint {
                        name: spec.name.clone(),
                        parent,
                        child,
                        kind: JointKind::Fixed,
                        axis: Vector3::zeros(),
                        origin,
                        limits: [0.0, 0.0],
                        neutral: 0.0,
                        q_index: None,
                    }
                }
                kind => {
                    let axis = Vector3::from(spec.axis.ok_or_else(|| ModelError::BadJoint {
                        joint: spec.name.clone(),
                        message: "missing axis".into(),
                    })?);
                    let norm = axis.norm();
                    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
                        return Err(ModelError::NonUnitAxis { joint: spec.name.clone(), norm });
                    }
                    let [lower, upper] = spec.limits.ok_or_else(|| ModelError::BadJoint {
                        joint: spec.name.clone(),
                        message: "missing limits".into(),
                    })?;
                    if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
                        return Err(ModelError::BadLimits { joint: spec.name.clone(), lower, upper });
                    }
                    let neutral = spec.neutral.unwrap_or(0.0);
                    if !neutral.is_finite() {
                        return Err(ModelError::BadJoint {
                            joint: spec.name.clone(),
                            message: "non-finite neutral value".into(),
                        });
                    }
                    let j = Joint {
                        name: spec.name.clone(),
                        parent,
                        child,
                        kind,
                        axis: axis / norm,
                        origin,
                        limits: [lower, upper],
                        neutral,
                        q_index: Some(n_q),
                    };
                    n_q += 1;
                    j
                }
            };
            joints.push(joint);
        }

        let mirror = match &file.mirror {
            None => None,
            Some(m) => {
                let index_of = |name: &String| -> Result<usize, ModelError> {
                    let j = joint_names.get(name).ok_or_else(|| ModelError::UnknownJoint(name.clone()))?;
                    joints[*j].q_index.ok_or_else(|| ModelError::BadMirror(format!("joint `{name}` is fixed")))
                };
                let mut entries = Vec::new();
                for p in &m.pairs {
                    entries.push(MirrorEntry::Pair { a: index_of(&p.a)?, b: index_of(&p.b)?, sign: p.sign });
                }
                for s in &m.singles {
                    entries.push(MirrorEntry::Single { joint: index_of(&s.joint)?, sign: s.sign });
                }
                Some(entries)
            }
        };

        Self::assemble(file.name.clone().unwrap_or_else(|| file.root.clone()), links, joints, root, mirror)
    }

    /// Builds the traversal order and checks every structural invariant.
    pub fn assemble(
        name: String,
        links: Vec<Link>,
        joints: Vec<Joint>,
        root: usize,
        mirror: Option<Vec<MirrorEntry>>,
    ) -> Result<Self, ModelError> {
        let n_links = links.len();
        let mut parent_joint: Vec<Option<usize>> = vec![None; n_links];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_links];
        for (j, joint) in joints.iter().enumerate() {
            if joint.child == root {
                return Err(ModelError::Cycle { link: links[root].name.clone() });
            }
            if parent_joint[joint.child].replace(j).is_some() {
                return Err(ModelError::MultipleParents { link: links[joint.child].name.clone() });
            }
            children[joint.parent].push(j);
        }
        let mut traversal = Vec::with_capacity(joints.len());
        let mut reached = vec![false; n_links];
        reached[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(l) = queue.pop_front() {
            for &j in &children[l] {
                traversal.push(j);
                let c = joints[j].child;
                reached[c] = true;
                queue.push_back(c);
            }
        }
        if let Some(l) = (0..n_links).find(|&l| !reached[l]) {
            // every unreached link with a parent chain that never hits the root lies on a loop
            return Err(if parent_joint[l].is_some() {
                ModelError::Cycle { link: links[l].name.clone() }
            } else {
                ModelError::Unreachable { link: links[l].name.clone() }
            });
        }
        let total_mass: f64 = links.iter().map(|l| l.inertia.mass()).sum();
        if total_mass <= 0.0 {
            return Err(ModelError::ZeroMass);
        }
        let n_q = joints.iter().filter(|j| j.q_index.is_some()).count();
        let model = Self { name, links, joints, root, mirror, traversal, parent_joint, n_q };
        if let Some(m) = &model.mirror {
            model.check_mirror(m)?;
        }
        Ok(model)
    }

    fn check_mirror(&self, entries: &[MirrorEntry]) -> Result<(), ModelError> {
        let limits = self.limits();
        let mut seen = vec![false; self.n_q];
        let mut mark = |i: usize| -> Result<(), ModelError> {
            if i >= self.n_q || std::mem::replace(&mut seen[i], true) {
                return Err(ModelError::BadMirror(format!("configuration index {i} listed twice")));
            }
            Ok(())
        };
        let mapped = |lim: [f64; 2], sign: i8| if sign > 0 { lim } else { [-lim[1], -lim[0]] };
        let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12;
        for e in entries {
            let sign = match e {
                MirrorEntry::Pair { sign, .. } | MirrorEntry::Single { joint: _, sign } => *sign,
            };
            if sign != 1 && sign != -1 {
                return Err(ModelError::BadMirror(format!("sign {sign} must be +1 or -1")));
            }
            match *e {
                MirrorEntry::Pair { a, b, sign } => {
                    if a == b {
                        return Err(ModelError::BadMirror("pair maps a joint to itself".into()));
                    }
                    mark(a)?;
                    mark(b)?;
                    if !close(limits[a], mapped(limits[b], sign)) {
                        return Err(ModelError::BadMirror(format!(
                            "limits of `{}` and `{}` are not mirror images",
                            self.joint_name_at(a),
                            self.joint_name_at(b)
                        )));
                    }
                }
                MirrorEntry::Single { joint, sign } => {
                    mark(joint)?;
                    if !close(limits[joint], mapped(limits[joint], sign)) {
                        return Err(ModelError::BadMirror(format!(
                            "limits of `{}` are not symmetric",
                            self.joint_name_at(joint)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn joint_name_at(&self, q_index: usize) -> &str {
        self.joints.iter().find(|j| j.q_index == Some(q_index)).map_or("?", |j| j.name.as_str())
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.inertia.mass()).sum()
    }

    /// Joint indices in parent-before-child order.
    pub fn traversal(&self) -> &[usize] {
        &self.traversal
    }

    pub fn parent_joint(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    /// Non-fixed joints in configuration order.
    pub fn active_joints(&self) -> impl Iterator<Item = &Joint> {
        self.joints.iter().filter(|j| j.q_index.is_some())
    }

    pub fn limits(&self) -> Vec<[f64; 2]> {
        self.active_joints().map(|j| j.limits).collect()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn check_dimension(&self, q: &DVector<f64>) -> Result<(), ModelError> {
        if q.len() != self.n_q {
            return Err(ModelError::Dimension { expected: self.n_q, got: q.len() });
        }
        Ok(())
    }

    /// Locks the named joints at their neutral values, turning them into
    /// fixed joints. Configuration indices of the remaining joints are
    /// compacted in declaration order.
    pub fn lock_joints<S: AsRef<str>>(&self, names: &[S]) -> Result<RobotModel, ModelError> {
        let mut joints = self.joints.clone();
        for name in names {
            let name = name.as_ref();
            let j = self.joint_index(name).ok_or_else(|| ModelError::UnknownJoint(name.to_string()))?;
            let joint = &mut joints[j];
            if joint.kind == JointKind::Fixed {
                return Err(ModelError::BadJoint { joint: name.to_string(), message: "already fixed".into() });
            }
            joint.origin = joint.transform(joint.neutral);
            joint.kind = JointKind::Fixed;
            joint.axis = Vector3::zeros();
            joint.limits = [0.0, 0.0];
            joint.neutral = 0.0;
            joint.q_index = None;
        }
        // old q index -> new q index
        let mut remap = vec![None; self.n_q];
        let mut next = 0;
        for (old, new) in self.joints.iter().zip(joints.iter_mut()) {
            if let Some(i) = old.q_index {
                if new.q_index.is_some() {
                    new.q_index = Some(next);
                    remap[i] = Some(next);
                    next += 1;
                }
            }
        }
        let mirror = match &self.mirror {
            None => None,
            Some(entries) => {
                let mut out = Vec::new();
                for e in entries {
                    match *e {
                        MirrorEntry::Pair { a, b, sign } => match (remap[a], remap[b]) {
                            (Some(a), Some(b)) => out.push(MirrorEntry::Pair { a, b, sign }),
                            (None, None) => {}
                            _ => {
                                return Err(ModelError::BadMirror(format!(
                                    "locking breaks mirror pair `{}`/`{}`",
                                    self.joint_name_at(a),
                                    self.joint_name_at(b)
                                )))
                            }
                        },
                        MirrorEntry::Single { joint, sign } => {
                            if let Some(joint) = remap[joint] {
                                out.push(MirrorEntry::Single { joint, sign });
                            }
                        }
                    }
                }
                Some(out)
            }
        };
        RobotModel::assemble(self.name.clone(), self.links.clone(), joints, self.root, mirror)
    }

    /// Sagittal reflection of a configuration vector. Joints absent from the
    /// mirror table are left unchanged.
    pub fn mirror_q(&self, q: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let entries = self.mirror.as_ref().ok_or(ModelError::NoMirror)?;
        self.check_dimension(q)?;
        let mut out = q.clone();
        for e in entries {
            match *e {
                MirrorEntry::Pair { a, b, sign } => {
                    let s = f64::from(sign);
                    out[a] = s * q[b];
                    out[b] = s * q[a];
                }
                MirrorEntry::Single { joint, sign } => out[joint] = f64::from(sign) * q[joint],
            }
        }
        Ok(out)
    }

    /// Uniform samples within the joint limits from a ChaCha8 stream seeded
    /// with `seed`. With `mirror`, each of the `n` base samples is followed
    /// by its reflection, giving `2n` configurations.
    pub fn sample_configurations(&self, n: usize, seed: u64, mirror: bool) -> Result<Vec<Configuration>, ModelError> {
        if n == 0 {
            return Err(ModelError::NoSamples);
        }
        if mirror && self.mirror.is_none() {
            return Err(ModelError::NoMirror);
        }
        let limits = self.limits();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(if mirror { 2 * n } else { n });
        for _ in 0..n {
            let q = DVector::from_iterator(
                limits.len(),
                limits.iter().map(|[lo, hi]| {
                    let u: f64 = rng.random();
                    (lo + (hi - lo) * u).clamp(*lo, *hi)
                }),
            );
            if mirror {
                let m = self.mirror_q(&q)?;
                out.push(Configuration::at_identity(q));
                out.push(Configuration::at_identity(m));
            } else {
                out.push(Configuration::at_identity(q));
            }
        }
        Ok(out)
    }
}
