// Fits the polynomial WBO angle of the slotted bar-and-flywheel and
// compares its drift and momentum error with the zero function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbo::planar::{
    fit_planar_psi, holonomy_cycle, planar_approx_cam, planar_cam, wbo_drift, PlanarGrid, PlanarPsiFunction,
    PlanarState,
};
use wbo::BarFlywheelParams;

pub struct PlanarFitSummary {
    pub coefficients: Vec<f64>,
    pub fitted_drift: f64,
    pub zero_drift: f64,
    pub fitted_cam_error: f64,
    pub zero_cam_error: f64,
}

pub fn run_example() -> Result<PlanarFitSummary, Box<dyn std::error::Error>> {
    let p = BarFlywheelParams::default();
    let zero = PlanarPsiFunction::standard_form();
    let fitted = fit_planar_psi(&p, &PlanarGrid::default_for(&p), &zero)?;
    println!("ψ̃ = {:+.5} d²φ {:+.5} d²φ³ {:+.5} φ {:+.5} φ³", fitted.coefficients[0], fitted.coefficients[1],
        fitted.coefficients[2], fitted.coefficients[3]);

    let cycle = holonomy_cycle(&p, 1.0);
    let fitted_drift = wbo_drift(&p, &fitted, &cycle, 20_000)?.max_drift;
    let zero_drift = wbo_drift(&p, &zero, &cycle, 20_000)?.max_drift;
    println!("max drift over the cycle: fitted {fitted_drift:.4e} rad, zero {zero_drift:.4e} rad");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let half = 0.5 * p.bar_length;
    let (mut fitted_err, mut zero_err) = (0.0, 0.0);
    for _ in 0..1000 {
        let s = PlanarState {
            theta: rng.random_range(-3.0..3.0),
            d: rng.random_range(-half..half),
            phi: rng.random_range(-1.5..1.5),
            theta_dot: rng.random_range(-1.0..1.0),
            d_dot: rng.random_range(-1.0..1.0),
            phi_dot: rng.random_range(-1.0..1.0),
        };
        let h = planar_cam(&p, &s);
        fitted_err += (h - planar_approx_cam(&p, &fitted, &s)).abs() / 1000.0;
        zero_err += (h - planar_approx_cam(&p, &zero, &s)).abs() / 1000.0;
    }
    println!("mean |H − H̃| over 1000 states: fitted {fitted_err:.4e}, zero {zero_err:.4e}");
    Ok(PlanarFitSummary {
        coefficients: fitted.coefficients,
        fitted_drift,
        zero_drift,
        fitted_cam_error: fitted_err,
        zero_cam_error: zero_err,
    })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
