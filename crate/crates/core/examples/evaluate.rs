// Compares the true and WBO-approximated momentum along a periodic leg
// motion of the biped, against the trivial Θ = 0 approximation.

use std::f64::consts::PI;

use nalgebra::DVector;
use wbo::artifact::evaluate_trajectory;
use wbo::trajectory::{SampledTrajectory, TrajectorySample};
use wbo::{fit_wbo, FitSettings, RobotModel, WboFunction};

/// Sinusoidal swing about the middle of each joint range, at `rate` Hz.
pub fn swing_trajectory(model: &RobotModel, duration: f64, rate: f64) -> SampledTrajectory {
    let limits = model.limits();
    let n = (duration * rate) as usize;
    let samples = (0..=n)
        .map(|k| {
            let t = k as f64 / rate;
            let mut q = DVector::zeros(limits.len());
            let mut qdot = DVector::zeros(limits.len());
            for (i, [lo, hi]) in limits.iter().enumerate() {
                let (mid, amp) = (0.5 * (lo + hi), 0.3 * (hi - lo));
                let w = 2.0 * PI * (0.8 + 0.1 * i as f64);
                let phase = if i < limits.len() / 2 { 0.0 } else { PI };
                q[i] = mid + amp * (w * t + phase).sin();
                qdot[i] = amp * w * (w * t + phase).cos();
            }
            TrajectorySample { t, q, qdot, base_orientation: None, base_angular_velocity: None }
        })
        .collect();
    SampledTrajectory::new(samples).expect("strictly increasing times")
}

pub fn run_example() -> Result<([f64; 3], [f64; 3]), Box<dyn std::error::Error>> {
    let model = RobotModel::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/biped12.json"))?;
    let settings = FitSettings { n_samples: 200, mirror: true, degree: 2, n_probes: 0, ..FitSettings::default() };
    let (wbo, report) = fit_wbo(&model, &settings)?;
    println!("quadratic fit: {:?}, {} iterations", report.status, report.iterations);

    let traj = swing_trajectory(&model, 2.0, 100.0);
    let (_, _, fitted) = evaluate_trajectory(&model, &wbo, &traj)?;
    let (_, _, zero) = evaluate_trajectory(&model, &WboFunction::identity(wbo.basis().clone()), &traj)?;
    println!("mean |H − H̃| per axis, fitted: {fitted:.4?} kg m²/s");
    println!("mean |H − H̃| per axis, Θ = 0:  {zero:.4?} kg m²/s");
    Ok((fitted, zero))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
