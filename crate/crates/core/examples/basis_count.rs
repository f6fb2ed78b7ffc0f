// Basis sizes for the bundled models, before and after joint locking.

use wbo::basis::basis_size;
use wbo::RobotModel;

pub const HUMANOID_LOCKS: [&str; 12] = [
    "l_gripper", "r_gripper", "l_wrist_yaw", "r_wrist_yaw", "l_wrist_roll", "r_wrist_roll", "l_wrist_pitch",
    "r_wrist_pitch", "l_ankle_pitch", "r_ankle_pitch", "l_ankle_roll", "r_ankle_roll",
];

pub fn run_example() -> Result<Vec<(String, usize, usize)>, Box<dyn std::error::Error>> {
    let assets = concat!(env!("CARGO_MANIFEST_DIR"), "/assets");
    let biped = RobotModel::load(format!("{assets}/biped12.json"))?;
    let humanoid = RobotModel::load(format!("{assets}/humanoid31.json"))?;
    let locked = humanoid.lock_joints(&HUMANOID_LOCKS)?;
    let mut rows = Vec::new();
    for (label, model) in [("biped12", &biped), ("humanoid31", &humanoid), ("humanoid31, locked", &locked)] {
        let n = basis_size(model.n_q(), 3);
        println!("{label:<20} {:>2} joints  n_q = {:>2}  cubic basis = {n}", model.joints.len(), model.n_q());
        rows.push((label.to_string(), model.n_q(), n));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
