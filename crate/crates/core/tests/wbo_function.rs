mod common;

use common::{load, random_quat};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbo::orientation::WboError;
use wbo::planar::embed_3d;
use wbo::{
    build_basis, centroidal_momentum_oracle, fit_wbo, BarFlywheelParams, Configuration, FitSettings, Pose,
    UnitQuaternion, WboFunction,
};

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Parent-frame angular velocity of a rotation path by central differences.
fn fd_angular_velocity(f: impl Fn(f64) -> UnitQuaternion, h: f64) -> Vector3<f64> {
    let r = f(0.0).to_rotation_matrix();
    let rdot = (f(h).to_rotation_matrix() - f(-h).to_rotation_matrix()) / (2.0 * h);
    vee(&(rdot * r.transpose()))
}

fn random_wbo(rng: &mut ChaCha8Rng, n_q: usize, degree: u32, scale: f64) -> WboFunction {
    let basis = build_basis(n_q, degree).unwrap();
    let theta = DMatrix::from_fn(3, basis.len(), |_, _| rng.random_range(-scale..scale));
    WboFunction::new(basis, theta).unwrap()
}

#[test]
fn induced_rate_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n_q = rng.random_range(1..=5);
        let wbo = random_wbo(&mut rng, n_q, 3, 0.05);
        let q0 = DVector::from_fn(n_q, |_, _| rng.random_range(-1.0..1.0));
        let qd = DVector::from_fn(n_q, |_, _| rng.random_range(-1.0..1.0));
        let analytic = wbo.omega_wbo(&q0, &qd).unwrap();
        let fd = fd_angular_velocity(|t| wbo.eval_q(&(&q0 + &qd * t)).unwrap(), 1e-5);
        assert!((analytic - fd).amax() < 1e-6, "{analytic} vs {fd}");
    }
}

#[test]
fn identity_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let wbo = random_wbo(&mut rng, 4, 3, 0.1);
    assert_eq!(wbo.eval_q(&DVector::zeros(4)).unwrap(), UnitQuaternion::identity());
    let zero = WboFunction::identity(wbo.basis().clone());
    let q = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
    assert_eq!(zero.eval_q(&q).unwrap(), UnitQuaternion::identity());
    assert_eq!(zero.t_matrix(&q).unwrap(), Matrix3::identity() * 2.0);
    assert_eq!(zero.omega_wbo(&q, &q).unwrap(), Vector3::zeros());
    assert_eq!(wbo.omega_wbo(&q, &DVector::zeros(4)).unwrap(), Vector3::zeros());
    let base = random_quat(&mut rng);
    let cfg = Configuration::new(Pose::from_rotation(base), DVector::zeros(4));
    assert_eq!(wbo.world_wbo(&cfg).unwrap(), base);
}

#[test]
fn rate_is_linear_in_joint_velocity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let wbo = random_wbo(&mut rng, 3, 3, 0.05);
        let q = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let a = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let (s, t) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let lhs = wbo.omega_wbo(&q, &(&a * s + &b * t)).unwrap();
        let rhs = wbo.omega_wbo(&q, &a).unwrap() * s + wbo.omega_wbo(&q, &b).unwrap() * t;
        assert!((lhs - rhs).amax() < 1e-12);
    }
}

#[test]
fn t_matrix_depends_only_on_the_quaternion() {
    // with only even terms, q and -q map to the same quaternion
    let basis = build_basis(2, 2).unwrap();
    let mut theta = DMatrix::zeros(3, basis.len());
    for k in 0..basis.len() {
        if basis.exponents(k).iter().sum::<u32>() == 2 {
            theta[(0, k)] = 0.1;
            theta[(2, k)] = -0.05;
        }
    }
    let wbo = WboFunction::new(basis, theta).unwrap();
    let q = DVector::from_vec(vec![0.4, -0.7]);
    let neg = -&q;
    assert_eq!(wbo.eval_q(&q).unwrap(), wbo.eval_q(&neg).unwrap());
    assert_eq!(wbo.t_matrix(&q).unwrap(), wbo.t_matrix(&neg).unwrap());
}

#[test]
fn domain_errors() {
    let basis = build_basis(1, 1).unwrap();
    let wbo = WboFunction::new(basis, DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0])).unwrap();
    assert!(matches!(wbo.eval_q(&DVector::from_element(1, 1.0)), Err(WboError::Domain { .. })));
    assert!(matches!(wbo.t_matrix(&DVector::from_element(1, 0.9)), Err(WboError::ThinDomain { .. })));
    assert!(wbo.t_matrix(&DVector::from_element(1, 0.8)).is_ok());
}

#[test]
fn world_rate_is_base_rate_plus_relative_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let wbo = random_wbo(&mut rng, 3, 2, 0.08);
        let q0 = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let qd = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let r0 = random_quat(&mut rng);
        let wb = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let world = |t: f64| {
            let base = r0.compose(&UnitQuaternion::from_axis_angle(&wb, wb.norm() * t));
            wbo.world_wbo(&Configuration::new(Pose::from_rotation(base), &q0 + &qd * t)).unwrap()
        };
        let fd = fd_angular_velocity(world, 1e-5);
        let expected = r0.to_rotation_matrix() * (wb + wbo.omega_wbo(&q0, &qd).unwrap());
        assert!((fd - expected).amax() < 1e-6);
    }
}

#[test]
fn pruning_moves_the_rate_by_a_bounded_amount() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let threshold = 1e-8;
    for _ in 0..20 {
        let mut wbo = random_wbo(&mut rng, 3, 3, 0.02);
        let mut theta = wbo.theta().clone();
        for v in theta.iter_mut() {
            if rng.random_bool(0.4) {
                *v = rng.random_range(-threshold..threshold);
            }
        }
        wbo = wbo.with_theta(theta).unwrap();
        let mut pruned = wbo.clone();
        pruned.prune(threshold);
        for _ in 0..20 {
            let q = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let qd = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let jq = wbo.basis().jacobian(&q).unwrap() * &qd;
            let n = wbo.basis().len() as f64;
            // T_Q has norm at most 2 / Q_s; Q_s > 0.99 for these coefficients
            let bound = 2.0 / 0.99 * n * threshold * jq.amax() * 1.01;
            let diff = wbo.omega_wbo(&q, &qd).unwrap() - pruned.omega_wbo(&q, &qd).unwrap();
            assert!(diff.amax() <= bound, "{} > {bound}", diff.amax());
        }
    }
}

#[test]
fn frozen_joints_give_exact_momentum() {
    let model = load("biped12.json");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let settings = FitSettings { n_samples: 50, degree: 2, n_probes: 0, ..FitSettings::default() };
    let (wbo, _) = fit_wbo(&model, &settings).unwrap();
    for cfg in model.sample_configurations(10, 3, false).unwrap() {
        let wb = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let zero = DVector::zeros(model.n_q());
        let approx = wbo.approx_cam(&model, &cfg, &wb, &zero).unwrap();
        let exact = centroidal_momentum_oracle(&model, &cfg, &wb, &Vector3::zeros(), &zero).unwrap();
        assert!((approx - exact).norm() < 1e-12 * exact.norm());
    }
}

/// Exact WBO angle of the bar-and-flywheel embedding is `kφ`; a polynomial
/// vector part reaches it only up to the truncation of `sin(kφ/2)`.
#[test]
fn embedded_bar_flywheel_fit_tracks_the_exact_angle() {
    let p = BarFlywheelParams { slotted: false, ..BarFlywheelParams::default() };
    let model = embed_3d(&p).unwrap();
    let k = p.flywheel_connection();
    let mut errors = Vec::new();
    for degree in [1, 3, 5] {
        let settings = FitSettings { n_samples: 400, degree, prune_threshold: 0.0, n_probes: 0, ..FitSettings::default() };
        let (wbo, report) = fit_wbo(&model, &settings).unwrap();
        assert!(report.cost_trace.last().unwrap() <= &report.cost_trace[0]);
        let mut worst: f64 = 0.0;
        for i in 0..=100 {
            let phi = -3.0 + 0.06 * i as f64;
            let q = DVector::from_element(1, phi);
            let qz = wbo.eval_q(&q).unwrap();
            assert!(qz.vector().x.abs() < 1e-14 && qz.vector().y.abs() < 1e-14);
            let angle = 2.0 * qz.vector().z.atan2(qz.scalar());
            worst = worst.max((angle - k * phi).abs());
            let a = wbo.approx_connection(&q).unwrap();
            worst = worst.max((a[(2, 0)] - k).abs());
        }
        errors.push(worst);
    }
    // (kφ/2)³/6 and (kφ/2)⁵/120 set the scale of the first two errors
    let x = k * 3.0 / 2.0;
    assert!(errors[0] < 4.0 * x.powi(3) / 6.0 * 2.0, "{errors:?}");
    assert!(errors[1] < 4.0 * x.powi(5) / 120.0 * 2.0, "{errors:?}");
    assert!(errors[2] < errors[1] && errors[1] < errors[0], "{errors:?}");

    // world WBO with the base at Rz(θ) has z angle θ + kφ up to the same error
    let settings = FitSettings { n_samples: 400, degree: 5, prune_threshold: 0.0, n_probes: 0, ..FitSettings::default() };
    let (wbo, _) = fit_wbo(&model, &settings).unwrap();
    let theta = 0.7;
    let phi = 1.3;
    let cfg = Configuration::new(
        Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z(), theta)),
        DVector::from_element(1, phi),
    );
    let w = wbo.world_wbo(&cfg).unwrap();
    assert!((w.yaw() - (theta + k * phi)).abs() < 1e-9);
}
