mod common;

use common::{load, naive_fk, random_state, random_tree, HUMANOID_LOCKS};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbo::model::ModelError;
use wbo::{centroidal_matrices, forward_kinematics, Configuration};

#[test]
fn biped_has_twelve_active_of_sixteen_joints() {
    let model = load("biped12.json");
    assert_eq!(model.joints.len(), 16);
    assert_eq!(model.n_q(), 12);
}

#[test]
fn humanoid_locks_down_to_nineteen() {
    let model = load("humanoid31.json");
    assert_eq!(model.n_q(), 31);
    let locked = model.lock_joints(&HUMANOID_LOCKS).unwrap();
    assert_eq!(locked.n_q(), 19);
    assert!((locked.total_mass() - model.total_mass()).abs() < 1e-12);
    assert!(locked.mirror.is_some());
}

#[test]
fn locking_nothing_or_everything() {
    let model = load("humanoid31.json");
    let none: [&str; 0] = [];
    let same = model.lock_joints(&none).unwrap();
    assert_eq!(same.n_q(), model.n_q());
    assert_eq!(same.joints, model.joints);
    let all: Vec<String> = model.active_joints().map(|j| j.name.clone()).collect();
    let rigid = model.lock_joints(&all).unwrap();
    assert_eq!(rigid.n_q(), 0);
    let m = centroidal_matrices(&rigid, &Configuration::at_identity(DVector::zeros(0))).unwrap();
    assert_eq!(m.m_joint.ncols(), 0);
    assert!(m.m_base.symmetric_eigenvalues().min() > 0.0);
}

#[test]
fn locking_an_unknown_joint_fails() {
    let model = load("biped12.json");
    assert!(matches!(model.lock_joints(&["nope"]), Err(ModelError::UnknownJoint(_))));
}

#[test]
fn locked_kinematics_match_substituted_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let n_links = rng.random_range(3..=8);
        let mut model = random_tree(&mut rng, n_links);
        if model.n_q() == 0 {
            continue;
        }
        for j in &mut model.joints {
            j.neutral = rng.random_range(-1.0..1.0);
        }
        let names: Vec<String> =
            model.active_joints().filter(|_| rng.random_bool(0.5)).map(|j| j.name.clone()).collect();
        let locked = model.lock_joints(&names).unwrap();
        let (cfg, _) = random_state(&mut rng, &locked);
        // expand the reduced configuration back to the full one
        let mut full = DVector::zeros(model.n_q());
        for (orig, new) in model.joints.iter().zip(&locked.joints) {
            if let Some(i) = orig.q_index {
                full[i] = match new.q_index {
                    Some(k) => cfg.q[k],
                    None => orig.neutral,
                };
            }
        }
        let a = forward_kinematics(&locked, &cfg).unwrap();
        let b = naive_fk(&model, &Configuration::new(cfg.base_pose, full));
        for (pose, m) in a.iter().zip(b) {
            assert!((pose.orientation.to_rotation_matrix() - m.fixed_view::<3, 3>(0, 0)).amax() < 1e-12);
            assert!((pose.translation - m.fixed_view::<3, 1>(0, 3)).amax() < 1e-12);
        }
    }
}

#[test]
fn sampling_respects_limits_and_seed() {
    for name in ["biped12.json", "humanoid31.json", "slotted.json"] {
        let model = load(name);
        let a = model.sample_configurations(300, 9, false).unwrap();
        let b = model.sample_configurations(300, 9, false).unwrap();
        assert_eq!(a, b);
        let limits = model.limits();
        for cfg in &a {
            for (v, [lo, hi]) in cfg.q.iter().zip(&limits) {
                assert!(lo <= v && v <= hi);
            }
        }
        assert_ne!(a, model.sample_configurations(300, 10, false).unwrap());
    }
}

#[test]
fn mirrored_sampling_doubles_and_stays_in_limits() {
    let model = load("biped12.json");
    let samples = model.sample_configurations(1000, 0, true).unwrap();
    assert_eq!(samples.len(), 2000);
    let limits = model.limits();
    for pair in samples.chunks(2) {
        assert_eq!(model.mirror_q(&pair[0].q).unwrap(), pair[1].q);
        for cfg in pair {
            for (v, [lo, hi]) in cfg.q.iter().zip(&limits) {
                assert!(lo <= v && v <= hi);
            }
        }
    }
    assert!(matches!(load("slotted.json").sample_configurations(3, 0, true), Err(ModelError::NoMirror)));
}

#[test]
fn mirrored_configurations_have_mirrored_momentum() {
    // reflecting the sagittal plane maps (Hx, Hy, Hz) to (-Hx, Hy, -Hz)
    let model = load("humanoid31.json");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for cfg in model.sample_configurations(20, 4, false).unwrap() {
        let qd = DVector::from_fn(model.n_q(), |_, _| rng.random_range(-1.0..1.0));
        let m = centroidal_matrices(&model, &cfg).unwrap();
        let mq = model.mirror_q(&cfg.q).unwrap();
        let mqd = model.mirror_q(&qd).unwrap();
        let mm = centroidal_matrices(&model, &Configuration::at_identity(mq)).unwrap();
        let h = &m.m_joint * &qd;
        let hm = &mm.m_joint * &mqd;
        assert!((hm.x + h.x).abs() < 1e-10 && (hm.y - h.y).abs() < 1e-10 && (hm.z + h.z).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn mirroring_is_an_involution(values in proptest::collection::vec(-3.0f64..3.0, 31)) {
        for (name, n) in [("biped12.json", 12), ("humanoid31.json", 31)] {
            let model = load(name);
            let q = DVector::from_column_slice(&values[..n]);
            let back = model.mirror_q(&model.mirror_q(&q).unwrap()).unwrap();
            prop_assert_eq!(back, q);
        }
    }
}
