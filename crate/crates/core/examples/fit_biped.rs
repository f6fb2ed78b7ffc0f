// Fits a cubic WBO to the 12-DoF biped with mirrored samples and writes the
// coefficient artifact to the system temp directory.

use wbo::artifact::{sha256_hex, ThetaArtifact};
use wbo::orientation::WboMetadata;
use wbo::{fit_wbo, FitReport, FitSettings};

pub fn run_example() -> Result<FitReport, Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/biped12.json");
    let bytes = std::fs::read(path)?;
    let model = wbo::parse_model(&bytes)?;
    let settings = FitSettings { n_samples: 250, mirror: true, ..FitSettings::default() };
    let (mut wbo, report) = fit_wbo(&model, &settings)?;
    wbo.metadata = WboMetadata { model_name: model.name.clone(), model_hash: sha256_hex(&bytes) };

    println!("status {:?} after {} iterations ({} step halvings)", report.status, report.iterations, report.step_halvings);
    for (k, c) in report.cost_trace.iter().enumerate() {
        println!("  iteration {k:>2}: cost {c:.6e}");
    }
    println!(
        "terms {} -> {} after pruning, cost {:.6e} -> {:.6e}",
        report.n_terms_before_prune, report.n_terms_after_prune, report.cost_before_prune, report.cost_after_prune
    );
    println!("held-out RMS of (A − Ã) q̇ per axis: {:?} rad/s", report.probe_rms);

    let out = std::env::temp_dir().join("biped12_theta.json");
    std::fs::write(&out, ThetaArtifact::new(&wbo, &settings, report.status).to_json()?)?;
    println!("coefficients written to {}", out.display());
    Ok(report)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
