// Net bar rotation produced by a closed loop of the slotted bar-and-flywheel
// at zero angular momentum.

use wbo::planar::{holonomy_closed_form, holonomy_cycle, reconstruct_planar};
use wbo::BarFlywheelParams;

pub fn run_example() -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let p = BarFlywheelParams::default();
    let cycle = holonomy_cycle(&p, 1.0);
    let trace = reconstruct_planar(&p, &cycle, 0.0, 20_000)?;
    let (_, theta) = *trace.last().expect("nonempty trace");
    let expected = holonomy_closed_form(&p);
    println!("net rotation after one cycle: {theta:+.9} rad");
    println!("closed form:                  {expected:+.9} rad");
    Ok((theta, expected))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
