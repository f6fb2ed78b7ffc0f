//! Command implementations for the `wbo` binary.
//!
//! Exit codes: 0 success, 1 error, 2 fit finished without converging (the
//! artifact is still written and flagged).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::artifact::{
    evaluate_trajectory, sha256_hex, write_eval_csv, EvalReport, FitReportFile, ModelRef, ThetaArtifact,
};
use crate::basis::basis_size;
use crate::fit::{fit_wbo, FitSettings, FitStatus};
use crate::model::{parse_model, RobotModel};
use crate::orientation::WboMetadata;
use crate::planar::{
    exact_psi_rel, fit_planar_psi, holonomy_closed_form, holonomy_cycle, planar_trace, BarFlywheelParams,
    random_flywheel_motion, PlanarGrid, PlanarPsiFunction, PlanarTracePoint,
};
use crate::trajectory::SampledTrajectory;
use crate::TOOL_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wbo", version, about = "Whole-body orientation fitting toolkit")]
pub struct Cli {
    /// Worker thread cap (defaults to all cores).
    #[arg(long, global = true, env = "WBO_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit WBO coefficients for a model.
    Fit(FitArgs),
    /// Compare real and approximated quantities along a trajectory.
    Eval(EvalArgs),
    /// Planar bar-and-flywheel demonstrations (CSV traces).
    Demo(DemoArgs),
    /// Print the number of monomial basis functions.
    BasisCount(BasisCountArgs),
    /// Validate a model file and print a summary.
    ModelCheck(ModelCheckArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Base sample count; doubled with --mirror.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub mirror: bool,
    #[arg(long, default_value_t = 3)]
    pub degree: u32,
    /// Ridge weight; defaults to 1e-12 times the sample count.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub prune: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_theta: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_cost: f64,
    #[arg(long, default_value_t = 200)]
    pub probes: usize,
    /// Joints to lock at their neutral values before fitting.
    #[arg(long, value_delimiter = ',')]
    pub lock: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub theta: PathBuf,
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Evaluation report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-time-step comparison (CSV).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub lock: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoKind {
    /// Closed joint loop on the slotted model: net rotation at zero momentum.
    Holonomy,
    /// Unslotted model: the exact WBO stays constant.
    Conservation,
    /// Fit ψ̃ on the slotted model and compare drift with ψ̃ = 0.
    PlanarFit,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub kind: DemoKind,
    #[arg(long, default_value_t = BarFlywheelParams::default().inertia_bar)]
    pub inertia_bar: f64,
    #[arg(long, default_value_t = BarFlywheelParams::default().inertia_flywheel)]
    pub inertia_flywheel: f64,
    #[arg(long, default_value_t = BarFlywheelParams::default().mass_bar)]
    pub mass_bar: f64,
    #[arg(long, default_value_t = BarFlywheelParams::default().mass_flywheel)]
    pub mass_flywheel: f64,
    #[arg(long, default_value_t = BarFlywheelParams::default().bar_length)]
    pub length: f64,
    /// RK4 steps over the whole motion.
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit every n-th integration step.
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BasisCountArgs {
    #[arg(long)]
    pub dof: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: u32,
}

#[derive(Debug, Args)]
pub struct ModelCheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub lock: Vec<String>,
}

type CmdResult = Result<i32, String>;

/// Parses nothing; runs an already parsed command line and maps failures to
/// exit code 1 with a diagnostic on stderr.
pub fn run(cli: Cli, stdout: &mut (dyn Write + Send)) -> i32 {
    let threads = cli.threads;
    let exec = || match cli.command {
        Command::Fit(a) => cmd_fit(&a, stdout),
        Command::Eval(a) => cmd_eval(&a, stdout),
        Command::Demo(a) => cmd_demo(&a, stdout),
        Command::BasisCount(a) => cmd_basis_count(&a, stdout),
        Command::ModelCheck(a) => cmd_model_check(&a, stdout),
    };
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(exec),
            Err(e) => Err(format!("thread pool: {e}")),
        },
        None => exec(),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn load_model(path: &Path, lock: &[String]) -> Result<(RobotModel, Vec<u8>), String> {
    let bytes = read(path)?;
    let model = parse_model(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    let model = if lock.is_empty() { model } else { model.lock_joints(lock).map_err(|e| e.to_string())? };
    Ok((model, bytes))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| e.to_string())
}

pub fn cmd_fit(args: &FitArgs, stdout: &mut dyn Write) -> CmdResult {
    let (model, bytes) = load_model(&args.model, &args.lock)?;
    let settings = FitSettings {
        n_samples: args.samples,
        seed: args.seed,
        mirror: args.mirror,
        degree: args.degree,
        ridge: args.ridge,
        max_iters: args.max_iters,
        tol_theta: args.tol_theta,
        tol_cost: args.tol_cost,
        prune_threshold: args.prune,
        n_probes: args.probes,
    };
    let (mut wbo, report) = fit_wbo(&model, &settings).map_err(|e| e.to_string())?;
    let model_ref = ModelRef { name: model.name.clone(), sha256: sha256_hex(&bytes) };
    wbo.metadata = WboMetadata { model_name: model_ref.name.clone(), model_hash: model_ref.sha256.clone() };
    let artifact = ThetaArtifact::new(&wbo, &settings, report.status);
    write(&args.out, artifact.to_json().map_err(|e| e.to_string())?.as_bytes())?;
    if let Some(path) = &args.report {
        let file = FitReportFile { tool_version: TOOL_VERSION.into(), model: model_ref, report: report.clone() };
        write(path, to_json(&file)?.as_bytes())?;
    }
    writeln!(
        stdout,
        "{:?} after {} iterations: N = {}, n_basis = {}, cost {:.6e} -> {:.6e}, terms {} -> {}",
        report.status,
        report.iterations,
        report.n_samples,
        report.n_basis,
        report.cost_trace[0],
        report.cost_after_prune,
        report.n_terms_before_prune,
        report.n_terms_after_prune,
    )
    .map_err(|e| e.to_string())?;
    Ok(match report.status {
        FitStatus::Converged => EXIT_OK,
        FitStatus::MaxIterations | FitStatus::Stalled => {
            eprintln!("warning: fit did not converge ({:?}); artifact flagged", report.status);
            EXIT_NOT_CONVERGED
        }
    })
}

pub fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> CmdResult {
    let (model, model_bytes) = load_model(&args.model, &args.lock)?;
    let theta_bytes = read(&args.theta)?;
    let traj_bytes = read(&args.trajectory)?;
    let artifact = ThetaArtifact::from_json(&theta_bytes).map_err(|e| format!("{}: {e}", args.theta.display()))?;
    let model_hash = sha256_hex(&model_bytes);
    if artifact.model.sha256 != model_hash {
        eprintln!("warning: coefficient artifact was fitted on a different model file");
    }
    let wbo = artifact.to_wbo().map_err(|e| e.to_string())?;
    if wbo.basis().n_q() != model.n_q() {
        return Err(format!("artifact expects {} joints, model has {}", wbo.basis().n_q(), model.n_q()));
    }
    let traj = SampledTrajectory::from_csv(traj_bytes.as_slice())
        .map_err(|e| format!("{}: {e}", args.trajectory.display()))?;
    let (rows, velocity_mae, cam_mae) = evaluate_trajectory(&model, &wbo, &traj).map_err(|e| e.to_string())?;
    let report = EvalReport {
        tool_version: TOOL_VERSION.into(),
        model_sha256: model_hash,
        theta_sha256: sha256_hex(&theta_bytes),
        trajectory_sha256: sha256_hex(&traj_bytes),
        velocity_mae,
        cam_mae,
        n_samples: rows.len(),
        span: [rows[0].t, rows[rows.len() - 1].t],
    };
    write(&args.out, to_json(&report)?.as_bytes())?;
    if let Some(path) = &args.csv {
        let mut buf = Vec::new();
        write_eval_csv(&rows, &mut buf).map_err(|e| e.to_string())?;
        write(path, &buf)?;
    }
    writeln!(stdout, "velocity MAE {velocity_mae:?} rad/s, CAM MAE {cam_mae:?} kg m^2/s over {} samples", rows.len())
        .map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

fn write_trace(rows: &[PlanarTracePoint], stride: usize, out: &mut dyn Write) -> Result<(), String> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| e.to_string();
    w.write_record(["t", "theta", "d", "phi", "psi_wbo", "cam"]).map_err(err)?;
    let stride = stride.max(1);
    let last = rows.len() - 1;
    for (i, r) in rows.iter().enumerate() {
        if i % stride == 0 || i == last {
            w.write_record([r.t, r.theta, r.d, r.phi, r.psi_wbo, r.cam].map(|v| v.to_string())).map_err(err)?;
        }
    }
    w.flush().map_err(|e| e.to_string())
}

pub fn cmd_demo(args: &DemoArgs, stdout: &mut dyn Write) -> CmdResult {
    let slotted = args.kind != DemoKind::Conservation;
    let p = BarFlywheelParams::new(
        args.inertia_bar,
        args.inertia_flywheel,
        args.mass_bar,
        args.mass_flywheel,
        args.length,
        slotted,
    )
    .map_err(|e| e.to_string())?;
    let err = |e: crate::planar::PlanarError| e.to_string();
    let rows = match args.kind {
        DemoKind::Holonomy => {
            let rows = planar_trace(&p, &PlanarPsiFunction::standard_form(), &holonomy_cycle(&p, 1.0), args.steps)
                .map_err(err)?;
            eprintln!(
                "net rotation {:.9e} rad (closed form {:.9e})",
                rows[rows.len() - 1].theta,
                holonomy_closed_form(&p)
            );
            rows
        }
        DemoKind::Conservation => {
            let mut psi = PlanarPsiFunction::zero(vec![(0, 1)]);
            psi.coefficients[0] = exact_psi_rel(&p, 1.0).map_err(err)?;
            let rows = planar_trace(&p, &psi, &random_flywheel_motion(args.seed, 10.0), args.steps).map_err(err)?;
            let start = rows[0].psi_wbo;
            let drift = rows.iter().map(|r| (r.psi_wbo - start).abs()).fold(0.0, f64::max);
            eprintln!("max WBO drift {drift:.3e} rad");
            rows
        }
        DemoKind::PlanarFit => {
            let fitted =
                fit_planar_psi(&p, &PlanarGrid::default_for(&p), &PlanarPsiFunction::standard_form()).map_err(err)?;
            let cycle = holonomy_cycle(&p, 1.0);
            let baseline = planar_trace(&p, &PlanarPsiFunction::standard_form(), &cycle, args.steps).map_err(err)?;
            let rows = planar_trace(&p, &fitted, &cycle, args.steps).map_err(err)?;
            let drift = |r: &[PlanarTracePoint]| r.iter().map(|x| (x.psi_wbo - r[0].psi_wbo).abs()).fold(0.0, f64::max);
            eprintln!("coefficients (d²φ, d²φ³, φ, φ³): {:?}", fitted.coefficients);
            eprintln!("max drift over the cycle: fitted {:.4e} rad, zero {:.4e} rad", drift(&rows), drift(&baseline));
            rows
        }
    };
    match &args.out {
        Some(path) => {
            let mut buf = Vec::new();
            write_trace(&rows, args.stride, &mut buf)?;
            write(path, &buf)?;
        }
        None => write_trace(&rows, args.stride, stdout)?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_basis_count(args: &BasisCountArgs, stdout: &mut dyn Write) -> CmdResult {
    if args.dof == 0 || args.degree == 0 {
        return Err("dof and degree must be at least 1".into());
    }
    writeln!(stdout, "{}", basis_size(args.dof, args.degree)).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

pub fn cmd_model_check(args: &ModelCheckArgs, stdout: &mut dyn Write) -> CmdResult {
    let (model, bytes) = load_model(&args.model, &args.lock)?;
    let summary = serde_json::json!({
        "tool_version": TOOL_VERSION,
        "model": model.name,
        "sha256": sha256_hex(&bytes),
        "links": model.links.len(),
        "joints": model.joints.len(),
        "n_q": model.n_q(),
        "total_mass": model.total_mass(),
        "mirror": model.mirror.is_some(),
        "configuration": model.active_joints().map(|j| j.name.clone()).collect::<Vec<_>>(),
    });
    writeln!(stdout, "{}", serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}
