//! Shared fixtures: random kinematic trees and an independent homogeneous
//! matrix forward-kinematics chain.

#![allow(dead_code)]

use nalgebra::{DVector, Matrix3, Matrix4, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wbo::model::{JointKind, JointSpec, LinkSpec, ModelFile, OriginSpec};
use wbo::{Configuration, Pose, RobotModel, UnitQuaternion};

pub fn asset(name: &str) -> String {
    format!("{}/assets/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn load(name: &str) -> RobotModel {
    RobotModel::load(asset(name)).expect("bundled asset parses")
}

pub const HUMANOID_LOCKS: [&str; 12] = [
    "l_gripper", "r_gripper", "l_wrist_yaw", "r_wrist_yaw", "l_wrist_roll", "r_wrist_roll", "l_wrist_pitch",
    "r_wrist_pitch", "l_ankle_pitch", "r_ankle_pitch", "l_ankle_roll", "r_ankle_roll",
];

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_quat(rng: &mut ChaCha8Rng) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(&random_unit(rng), rng.random_range(-3.0..3.0))
}

/// Rotated box inertia: always physical.
fn random_inertia(rng: &mut ChaCha8Rng, mass: f64) -> [f64; 6] {
    let (a, b, c) = (rng.random_range(0.05..0.5), rng.random_range(0.05..0.5), rng.random_range(0.05..0.5));
    let d = Matrix3::from_diagonal(&Vector3::new(b * b + c * c, a * a + c * c, a * a + b * b)) * (mass / 12.0);
    let r = random_quat(rng).to_rotation_matrix();
    let i = r * d * r.transpose();
    [i[(0, 0)], i[(1, 1)], i[(2, 2)], i[(0, 1)], i[(0, 2)], i[(1, 2)]]
}

/// Tree of `n_links` links with random parents, mixed revolute, prismatic
/// and (occasionally) fixed joints, random origins and inertias.
pub fn random_tree(rng: &mut ChaCha8Rng, n_links: usize) -> RobotModel {
    let mut links = Vec::new();
    let mut joints = Vec::new();
    for i in 0..n_links {
        let mass = rng.random_range(0.2..5.0);
        links.push(LinkSpec {
            name: format!("l{i}"),
            mass,
            com: Vector3::from_fn(|_, _| rng.random_range(-0.3..0.3)).into(),
            inertia: random_inertia(rng, mass),
        });
        if i == 0 {
            continue;
        }
        let parent = rng.random_range(0..i);
        let roll: f64 = rng.random();
        let kind = if roll < 0.55 {
            JointKind::Revolute
        } else if roll < 0.9 {
            JointKind::Prismatic
        } else {
            JointKind::Fixed
        };
        let q = random_quat(rng);
        joints.push(JointSpec {
            name: format!("j{i}"),
            parent: format!("l{parent}"),
            child: format!("l{i}"),
            kind,
            axis: (kind != JointKind::Fixed).then(|| random_unit(rng).into()),
            origin: OriginSpec {
                xyz: Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5)).into(),
                quat: [q.scalar(), q.vector().x, q.vector().y, q.vector().z],
            },
            limits: (kind != JointKind::Fixed).then_some([-1.5, 1.5]),
            neutral: None,
        });
    }
    let file = ModelFile { name: Some("random".into()), root: "l0".into(), links, joints, mirror: None };
    RobotModel::from_file(&file).expect("random tree is valid")
}

pub fn random_state(rng: &mut ChaCha8Rng, model: &RobotModel) -> (Configuration, DVector<f64>) {
    let pose = Pose::new(random_quat(rng), Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)));
    let q = DVector::from_fn(model.n_q(), |_, _| rng.random_range(-1.5..1.5));
    let qdot = DVector::from_fn(model.n_q(), |_, _| rng.random_range(-2.0..2.0));
    (Configuration::new(pose, q), qdot)
}

fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = Matrix3::new(0.0, -axis.z, axis.y, axis.z, 0.0, -axis.x, -axis.y, axis.x, 0.0);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

fn homogeneous(r: Matrix3<f64>, p: Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&p);
    m
}

/// World transforms of every link by 4×4 matrix products, resolving parents
/// by repeated passes rather than a precomputed traversal.
pub fn naive_fk(model: &RobotModel, cfg: &Configuration) -> Vec<Matrix4<f64>> {
    let n = model.links.len();
    let mut out: Vec<Option<Matrix4<f64>>> = vec![None; n];
    out[model.root] = Some(homogeneous(
        cfg.base_pose.orientation.to_rotation_matrix(),
        cfg.base_pose.translation,
    ));
    while out.iter().any(Option::is_none) {
        for j in &model.joints {
            if out[j.child].is_some() {
                continue;
            }
            let Some(parent) = out[j.parent] else { continue };
            let origin = homogeneous(j.origin.orientation.to_rotation_matrix(), j.origin.translation);
            let value = j.q_index.map_or(0.0, |i| cfg.q[i]);
            let motion = match j.kind {
                JointKind::Revolute => homogeneous(rodrigues(&j.axis, value), Vector3::zeros()),
                JointKind::Prismatic => homogeneous(Matrix3::identity(), j.axis * value),
                JointKind::Fixed => Matrix4::identity(),
            };
            out[j.child] = Some(parent * origin * motion);
        }
    }
    out.into_iter().map(Option::unwrap).collect()
}
