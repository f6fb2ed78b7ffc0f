// On the unslotted bar-and-flywheel the exact WBO angle stays constant
// under arbitrary flywheel motion while the bar itself turns.

use wbo::planar::{exact_psi_rel, planar_trace, random_flywheel_motion, PlanarPsiFunction};
use wbo::BarFlywheelParams;

pub fn run_example() -> Result<f64, Box<dyn std::error::Error>> {
    let p = BarFlywheelParams { slotted: false, ..BarFlywheelParams::default() };
    let mut psi = PlanarPsiFunction::zero(vec![(0, 1)]);
    psi.coefficients[0] = exact_psi_rel(&p, 1.0)?;
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let trace = planar_trace(&p, &psi, &random_flywheel_motion(seed, 10.0), 100_000)?;
        let swing = trace.iter().map(|r| r.theta.abs()).fold(0.0, f64::max);
        let drift = trace.iter().map(|r| (r.psi_wbo - trace[0].psi_wbo).abs()).fold(0.0, f64::max);
        println!("seed {seed}: bar swing {swing:.4} rad, WBO drift {drift:.2e} rad");
        worst = worst.max(drift);
    }
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
