mod common;

use common::{load, naive_fk, random_quat, random_state, random_tree};
use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbo::planar::{embed_3d, holonomy_closed_form, holonomy_cycle};
use wbo::trajectory::FnTrajectory;
use wbo::{
    centroidal_matrices, centroidal_momentum_oracle, forward_kinematics, local_connection,
    reconstruct_base_orientation, BarFlywheelParams, Configuration, Pose, RobotModel, UnitQuaternion,
};

fn rel(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

#[test]
fn matrices_match_per_link_oracle_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..250 {
        let n_links = rng.random_range(3..=8);
        let model = random_tree(&mut rng, n_links);
        let (cfg, qdot) = random_state(&mut rng, &model);
        let omega = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let v = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let m = centroidal_matrices(&model, &cfg).unwrap();
        let oracle = centroidal_momentum_oracle(&model, &cfg, &omega, &v, &qdot).unwrap();
        let err = rel(&m.momentum(&omega, &qdot), &oracle);
        assert!(err < 1e-10, "case {case}: relative error {err:e}");
        worst = worst.max(err);
    }
    assert!(worst < 1e-10);
}

#[test]
fn momentum_is_independent_of_base_linear_velocity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n_links = rng.random_range(3..=8);
        let model = random_tree(&mut rng, n_links);
        let (cfg, qdot) = random_state(&mut rng, &model);
        let omega = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let v1 = Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0));
        let h0 = centroidal_momentum_oracle(&model, &cfg, &omega, &Vector3::zeros(), &qdot).unwrap();
        let h1 = centroidal_momentum_oracle(&model, &cfg, &omega, &v1, &qdot).unwrap();
        assert!((h0 - h1).norm() <= 1e-12 * h0.norm().max(1.0), "{:e}", (h0 - h1).norm());
    }
}

#[test]
fn base_frame_momentum_is_invariant_to_world_pose() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let n_links = rng.random_range(3..=8);
        let model = random_tree(&mut rng, n_links);
        let (cfg, qdot) = random_state(&mut rng, &model);
        let moved = Configuration::new(
            Pose::new(random_quat(&mut rng), Vector3::new(3.0, -1.0, 2.0)),
            cfg.q.clone(),
        );
        let omega = Vector3::new(0.3, -0.1, 0.7);
        let a = centroidal_matrices(&model, &cfg).unwrap();
        let b = centroidal_matrices(&model, &moved).unwrap();
        assert!((a.m_base - b.m_base).norm() < 1e-10 * a.m_base.norm());
        assert!((&a.m_joint - &b.m_joint).norm() < 1e-10 * a.m_joint.norm().max(1.0));
        let ha = centroidal_momentum_oracle(&model, &cfg, &omega, &Vector3::zeros(), &qdot).unwrap();
        let hb = centroidal_momentum_oracle(&model, &moved, &omega, &Vector3::zeros(), &qdot).unwrap();
        assert!(rel(&ha, &hb) < 1e-10);
    }
}

#[test]
fn forward_kinematics_matches_matrix_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n_links = rng.random_range(2..=8);
        let model = random_tree(&mut rng, n_links);
        let (cfg, _) = random_state(&mut rng, &model);
        let poses = forward_kinematics(&model, &cfg).unwrap();
        for (pose, m) in poses.iter().zip(naive_fk(&model, &cfg)) {
            let r = pose.orientation.to_rotation_matrix();
            assert!((r - m.fixed_view::<3, 3>(0, 0)).amax() < 1e-12);
            assert!((pose.translation - m.fixed_view::<3, 1>(0, 3)).amax() < 1e-12);
        }
    }
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Momentum from finite differences of link poses; shares only the model
/// data with the library.
fn finite_difference_momentum(
    model: &RobotModel,
    cfg: &Configuration,
    omega: &Vector3<f64>,
    v: &Vector3<f64>,
    qdot: &DVector<f64>,
) -> Vector3<f64> {
    let h = 1e-6;
    let at = |t: f64| {
        let rot = UnitQuaternion::from_axis_angle(omega, omega.norm() * t);
        let base = Pose::new(
            cfg.base_pose.orientation.compose(&rot),
            cfg.base_pose.translation + cfg.base_pose.orientation.rotate(&(v * t)),
        );
        naive_fk(model, &Configuration::new(base, &cfg.q + qdot * t))
    };
    let (plus, minus, now) = (at(h), at(-h), at(0.0));
    let total: f64 = model.links.iter().map(|l| l.inertia.mass()).sum();
    let com_of = |tf: &nalgebra::Matrix4<f64>, c: &Vector3<f64>| (tf * c.push(1.0)).xyz();
    let com = model.links.iter().zip(&now).map(|(l, tf)| l.inertia.mass() * com_of(tf, &l.inertia.com())).sum::<Vector3<f64>>()
        / total;
    let mut hw = Vector3::zeros();
    for (i, link) in model.links.iter().enumerate() {
        let r = now[i].fixed_view::<3, 3>(0, 0).into_owned();
        let rdot = (plus[i].fixed_view::<3, 3>(0, 0) - minus[i].fixed_view::<3, 3>(0, 0)) / (2.0 * h);
        let w = vee(&(rdot * r.transpose()));
        let c = link.inertia.com();
        let cdot = (com_of(&plus[i], &c) - com_of(&minus[i], &c)) / (2.0 * h);
        hw += r * link.inertia.inertia_about_com() * r.transpose() * w
            + link.inertia.mass() * (com_of(&now[i], &c) - com).cross(&cdot);
    }
    cfg.base_pose.orientation.to_rotation_matrix().transpose() * hw
}

#[test]
fn oracle_agrees_with_finite_differenced_link_motion() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..40 {
        let n_links = rng.random_range(3..=8);
        let model = random_tree(&mut rng, n_links);
        let (cfg, qdot) = random_state(&mut rng, &model);
        let omega = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let v = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let oracle = centroidal_momentum_oracle(&model, &cfg, &omega, &v, &qdot).unwrap();
        let fd = finite_difference_momentum(&model, &cfg, &omega, &v, &qdot);
        assert!(rel(&fd, &oracle) < 1e-6, "{:e}", rel(&fd, &oracle));
    }
}

#[test]
fn bar_flywheel_momentum_and_connection() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (ib, i_f) = (rng.random_range(0.1..3.0), rng.random_range(0.01..1.0));
        let p = BarFlywheelParams::new(ib, i_f, 2.0, 0.5, 1.0, false).unwrap();
        let model = embed_3d(&p).unwrap();
        let phi = rng.random_range(-3.0..3.0);
        let cfg = Configuration::new(Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z(), 0.4)), DVector::from_element(1, phi));
        let (theta_dot, phi_dot) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let h = centroidal_momentum_oracle(&model, &cfg, &Vector3::new(0.0, 0.0, theta_dot), &Vector3::zeros(), &DVector::from_element(1, phi_dot)).unwrap();
        assert!((h.z - ((ib + i_f) * theta_dot + i_f * phi_dot)).abs() < 1e-12);
        assert!(h.xy().norm() < 1e-12);
        let m = centroidal_matrices(&model, &cfg).unwrap();
        assert!((m.m_base[(2, 2)] - (ib + i_f)).abs() < 1e-12);
        assert!((m.m_joint[(2, 0)] - i_f).abs() < 1e-12);
        let a = local_connection(&model, &cfg).unwrap().a;
        assert!((a[(2, 0)] - i_f / (ib + i_f)).abs() < 1e-12);
        assert!(a[(0, 0)].abs() < 1e-14 && a[(1, 0)].abs() < 1e-14);
    }
}

#[test]
fn slotted_connection_matches_planar_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = BarFlywheelParams::default();
    let model = embed_3d(&p).unwrap();
    for _ in 0..50 {
        let d = rng.random_range(-0.5..0.5);
        let q = DVector::from_vec(vec![d, rng.random_range(-3.0..3.0)]);
        let cfg = Configuration::at_identity(q);
        let m = centroidal_matrices(&model, &cfg).unwrap();
        assert!((m.m_base[(2, 2)] - p.locked_inertia(d)).abs() < 1e-10 * p.locked_inertia(d));
        let a = local_connection(&model, &cfg).unwrap().a;
        let planar = wbo::planar::planar_connection(&p, d).unwrap();
        assert!((a[(2, 0)] - planar[0]).abs() < 1e-10);
        assert!((a[(2, 1)] - planar[1]).abs() < 1e-10 * planar[1]);
    }
}

#[test]
fn massless_limbs_have_zero_connection() {
    let text = r#"{
        "root": "body",
        "links": [
            {"name": "body", "mass": 3.0, "inertia": [0.2, 0.3, 0.4, 0.0, 0.0, 0.0]},
            {"name": "arm", "mass": 0.0, "inertia": [0, 0, 0, 0, 0, 0]},
            {"name": "hand", "mass": 0.0, "inertia": [0, 0, 0, 0, 0, 0]}
        ],
        "joints": [
            {"name": "shoulder", "parent": "body", "child": "arm", "kind": "revolute", "axis": [0, 1, 0],
             "origin": {"xyz": [0.1, 0.2, 0.3]}, "limits": [-2, 2]},
            {"name": "slide", "parent": "arm", "child": "hand", "kind": "prismatic", "axis": [1, 0, 0],
             "origin": {"xyz": [0.0, 0.0, -0.3]}, "limits": [0, 0.2]}
        ]
    }"#;
    let model = wbo::parse_model(text.as_bytes()).unwrap();
    let a = local_connection(&model, &Configuration::at_identity(DVector::from_vec(vec![0.7, 0.1]))).unwrap().a;
    assert_eq!(a.amax(), 0.0);
}

#[test]
fn flywheel_turn_rotates_bar_backwards() {
    let p = BarFlywheelParams { slotted: false, ..BarFlywheelParams::default() };
    let model = embed_3d(&p).unwrap();
    let big_phi = 2.5;
    let traj = FnTrajectory::new(1, (0.0, 1.0), move |t| {
        (DVector::from_element(1, big_phi * t * t), DVector::from_element(1, 2.0 * big_phi * t))
    });
    let path = reconstruct_base_orientation(&model, &traj, UnitQuaternion::identity(), 1000).unwrap();
    let (_, end) = path.last().unwrap();
    let expected = -big_phi * p.inertia_flywheel / (p.inertia_bar + p.inertia_flywheel);
    assert!((end.yaw() - expected).abs() < 1e-10, "{} vs {expected}", end.yaw());
}

#[test]
fn holonomy_through_the_three_dimensional_pipeline() {
    let p = BarFlywheelParams::default();
    let model = embed_3d(&p).unwrap();
    let cycle = holonomy_cycle(&p, 1.0);
    // 1e-4 of the cycle duration per step
    let path = reconstruct_base_orientation(&model, &cycle, UnitQuaternion::identity(), 40_000).unwrap();
    let (_, end) = path.last().unwrap();
    let expected = holonomy_closed_form(&p);
    assert!(expected > 0.0);
    assert!((end.yaw() - expected).abs() < 1e-6, "{} vs {expected}", end.yaw());
}

#[test]
fn reconstruction_error_is_fourth_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let model = random_tree(&mut rng, 5);
    let n = model.n_q();
    let freqs: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
    let traj = FnTrajectory::new(n, (0.0, 1.0), move |t| {
        let q = DVector::from_fn(n, |i, _| 0.8 * (freqs[i] * t).sin());
        let qd = DVector::from_fn(n, |i, _| 0.8 * freqs[i] * (freqs[i] * t).cos());
        (q, qd)
    });
    let end = |steps| reconstruct_base_orientation(&model, &traj, UnitQuaternion::identity(), steps).unwrap().last().unwrap().1;
    let reference = end(3200);
    let err = |steps| (end(steps).as_vector4() - reference.as_vector4()).norm();
    let (e1, e2) = (err(25), err(50));
    assert!(e1 > 0.0 && e1 / e2 > 10.0, "errors {e1:e} {e2:e}");
}

#[test]
fn reconstructed_motion_carries_no_momentum() {
    let model = load("biped12.json");
    let n = model.n_q();
    let limits = model.limits();
    let traj = FnTrajectory::new(n, (0.0, 1.0), move |t| {
        let q = DVector::from_fn(n, |i, _| {
            let [lo, hi] = limits[i];
            0.5 * (lo + hi) + 0.2 * (hi - lo) * (3.0 * t + i as f64).sin()
        });
        let qd = DVector::from_fn(n, |i, _| {
            let [lo, hi] = limits[i];
            0.6 * (hi - lo) * (3.0 * t + i as f64).cos()
        });
        (q, qd)
    });
    let steps = 2000;
    let path = reconstruct_base_orientation(&model, &traj, UnitQuaternion::identity(), steps).unwrap();
    let dt = 1.0 / steps as f64;
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for k in (100..steps - 100).step_by(97) {
        let (t, q) = path[k];
        // body angular velocity from neighbouring samples
        let rel_rot = path[k - 1].1.conjugate().compose(&path[k + 1].1);
        let omega = 2.0 * rel_rot.vector() / (2.0 * dt);
        let (joints, rates) = wbo::trajectory::JointTrajectory::state(&traj, t);
        let cfg = Configuration::new(Pose::from_rotation(q), joints);
        let h = centroidal_momentum_oracle(&model, &cfg, &omega, &Vector3::zeros(), &rates).unwrap();
        let m = centroidal_matrices(&model, &cfg).unwrap();
        scale = scale.max((&m.m_joint * &rates).norm());
        worst = worst.max(h.norm());
    }
    assert!(worst < 1e-5 * scale, "{worst:e} vs {scale:e}");
}

#[test]
fn single_body_locked_inertia() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = random_tree(&mut rng, 1);
    let r = random_quat(&mut rng);
    let m = centroidal_matrices(&model, &Configuration::new(Pose::from_rotation(r), DVector::zeros(0))).unwrap();
    let i = model.links[0].inertia.inertia_about_com();
    // base frame coincides with the body frame
    assert!((m.m_base - i).amax() < 1e-12);
    assert_eq!(m.m_joint.ncols(), 0);
}
