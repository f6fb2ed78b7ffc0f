// Centroidal momentum of the humanoid two ways, and the base rotation a
// zero-momentum arm swing produces.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use wbo::trajectory::FnTrajectory;
use wbo::{
    centroidal_matrices, centroidal_momentum_oracle, reconstruct_base_orientation, RobotModel,
    UnitQuaternion,
};

pub fn run_example() -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let model = RobotModel::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/humanoid31.json"))?;
    let cfg = model.sample_configurations(1, 3, false)?.remove(0);
    let qdot = DVector::from_fn(model.n_q(), |i, _| ((i as f64) * 0.7).sin());
    let omega = Vector3::new(0.1, -0.2, 0.3);
    let m = centroidal_matrices(&model, &cfg)?;
    let h = m.momentum(&omega, &qdot);
    let h_oracle = centroidal_momentum_oracle(&model, &cfg, &omega, &Vector3::new(1.0, 2.0, 3.0), &qdot)?;
    let rel = (h - h_oracle).norm() / h_oracle.norm();
    println!("H from matrices {:.6?}", h.as_slice());
    println!("H per link      {:.6?}  (relative gap {rel:.1e})", h_oracle.as_slice());

    // both shoulders trace mirrored loops in (pitch, roll)
    let sp = [model.joint_index("l_shoulder_pitch"), model.joint_index("r_shoulder_pitch")];
    let sr = [model.joint_index("l_shoulder_roll"), model.joint_index("r_shoulder_roll")];
    let idx = |j: Option<usize>| model.joints[j.expect("joint exists")].q_index.expect("active");
    let (lp, rp, lr, rr) = (idx(sp[0]), idx(sp[1]), idx(sr[0]), idx(sr[1]));
    let n = model.n_q();
    let traj = FnTrajectory::new(n, (0.0, 1.0), move |t| {
        let (c, s) = ((2.0 * PI * t).cos(), (2.0 * PI * t).sin());
        let mut q = DVector::zeros(n);
        let mut qd = DVector::zeros(n);
        q[lp] = -0.5 + 0.5 * c;
        qd[lp] = -PI * s;
        q[lr] = 0.5 - 0.5 * c + 0.5 * s;
        qd[lr] = PI * s + PI * c;
        q[rp] = -0.5 + 0.5 * c;
        qd[rp] = -PI * s;
        q[rr] = -0.5 + 0.5 * c - 0.5 * s;
        qd[rr] = -PI * s - PI * c;
        (q, qd)
    });
    let path = reconstruct_base_orientation(&model, &traj, UnitQuaternion::identity(), 400)?;
    let (_, end) = path.last().expect("nonempty");
    let angle = 2.0 * end.vector().norm().atan2(end.scalar());
    println!("base rotation after one arm cycle: {angle:.5} rad about {:.4?}", end.vector().normalize().as_slice());
    Ok((rel, angle))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
