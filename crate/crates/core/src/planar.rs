//! Closed-form bar-and-flywheel models.
//!
//! A bar (the base) carries a flywheel on a rotary joint `φ`. In the slotted
//! variant the flywheel axis also slides along the bar by `d`. With no
//! external moments the centroidal angular momentum is
//! `H = (I_B + I_F + μ d²) θ̇ + I_F φ̇`, `μ = m_B m_F / (m_B + m_F)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Joint, JointKind, Link, ModelError, RobotModel};
use crate::spatial::{Pose, SpatialInertia};
use crate::trajectory::{FnTrajectory, JointTrajectory, TrajectoryError, WaypointPath};

#[derive(Debug, Error)]
pub enum PlanarError {
    #[error("parameters must be positive and finite: {0}")]
    Params(String),
    #[error("operation requires the unslotted model")]
    Slotted,
    #[error("slot offset {d} exceeds half the bar length {half}")]
    SlotRange { d: f64, half: f64 },
    #[error("empty grid")]
    EmptyGrid,
    #[error("degenerate grid: design matrix has rank {rank} for {terms} active terms")]
    RankDeficient { rank: usize, terms: usize },
    #[error("integration: {0}")]
    Integration(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarFlywheelParams {
    pub inertia_bar: f64,
    pub inertia_flywheel: f64,
    pub mass_bar: f64,
    pub mass_flywheel: f64,
    pub bar_length: f64,
    pub slotted: bool,
}

impl Default for BarFlywheelParams {
    /// Demo values: a 1 m, 4 kg bar and a 1 kg flywheel.
    fn default() -> Self {
        Self {
            inertia_bar: 4.0 / 12.0,
            inertia_flywheel: 0.02,
            mass_bar: 4.0,
            mass_flywheel: 1.0,
            bar_length: 1.0,
            slotted: true,
        }
    }
}

impl BarFlywheelParams {
    pub fn new(
        inertia_bar: f64,
        inertia_flywheel: f64,
        mass_bar: f64,
        mass_flywheel: f64,
        bar_length: f64,
        slotted: bool,
    ) -> Result<Self, PlanarError> {
        let p = Self { inertia_bar, inertia_flywheel, mass_bar, mass_flywheel, bar_length, slotted };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PlanarError> {
        let vals = [self.inertia_bar, self.inertia_flywheel, self.mass_bar, self.mass_flywheel, self.bar_length];
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PlanarError::Params(format!("{vals:?}")));
        }
        Ok(())
    }

    /// Reduced mass `m_B m_F / (m_B + m_F)`.
    pub fn reduced_mass(&self) -> f64 {
        self.mass_bar * self.mass_flywheel / (self.mass_bar + self.mass_flywheel)
    }

    /// Locked rotational inertia about the system CoM at slot offset `d`.
    pub fn locked_inertia(&self, d: f64) -> f64 {
        let d = if self.slotted { d } else { 0.0 };
        self.inertia_bar + self.inertia_flywheel + self.reduced_mass() * d * d
    }

    fn check_d(&self, d: f64) -> Result<(), PlanarError> {
        let half = 0.5 * self.bar_length;
        if self.slotted && d.abs() > half * (1.0 + 1e-12) {
            return Err(PlanarError::SlotRange { d, half });
        }
        Ok(())
    }

    /// Connection row `[∂/∂d, ∂/∂φ] = [0, I_F / (I_B + I_F + μ d²)]`. For the
    /// unslotted model `d` is ignored and the second entry is the 1×1
    /// connection.
    pub fn connection(&self, d: f64) -> [f64; 2] {
        [0.0, self.inertia_flywheel / self.locked_inertia(d)]
    }

    /// `I_F / (I_B + I_F)`.
    pub fn flywheel_connection(&self) -> f64 {
        self.inertia_flywheel / (self.inertia_bar + self.inertia_flywheel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarState {
    pub theta: f64,
    pub d: f64,
    pub phi: f64,
    pub theta_dot: f64,
    pub d_dot: f64,
    pub phi_dot: f64,
}

/// Centroidal angular momentum of the planar system.
pub fn planar_cam(p: &BarFlywheelParams, s: &PlanarState) -> f64 {
    p.locked_inertia(s.d) * s.theta_dot + p.inertia_flywheel * s.phi_dot
}

/// Momentum predicted by a WBO function: `I(d) (θ̇ + ∇ψ̃ · [ḋ, φ̇])`.
pub fn planar_approx_cam(p: &BarFlywheelParams, psi: &PlanarPsiFunction, s: &PlanarState) -> f64 {
    let g = psi.gradient(s.d, s.phi);
    p.locked_inertia(s.d) * (s.theta_dot + g[0] * s.d_dot + g[1] * s.phi_dot)
}

pub fn planar_connection(p: &BarFlywheelParams, d: f64) -> Result<[f64; 2], PlanarError> {
    p.check_d(d)?;
    Ok(p.connection(d))
}

/// Exact relative WBO angle of the integrable (unslotted) model.
pub fn exact_psi_rel(p: &BarFlywheelParams, phi: f64) -> Result<f64, PlanarError> {
    if p.slotted {
        return Err(PlanarError::Slotted);
    }
    Ok(p.flywheel_connection() * phi)
}

/// `ψ̃(d, φ) = Σ c_k d^a_k φ^b_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarPsiFunction {
    /// Exponent pairs `(a, b)` on `(d, φ)`.
    pub terms: Vec<(u32, u32)>,
    pub coefficients: Vec<f64>,
}

impl PlanarPsiFunction {
    /// The four-term form `c₁ d²φ + c₂ d²φ³ + c₃ φ + c₄ φ³` with zero
    /// coefficients.
    pub fn standard_form() -> Self {
        Self::zero(vec![(2, 1), (2, 3), (0, 1), (0, 3)])
    }

    pub fn zero(terms: Vec<(u32, u32)>) -> Self {
        let n = terms.len();
        Self { terms, coefficients: vec![0.0; n] }
    }

    pub fn eval(&self, d: f64, phi: f64) -> f64 {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(&(a, b), c)| c * d.powi(a as i32) * phi.powi(b as i32))
            .sum()
    }

    fn term_gradient(a: u32, b: u32, d: f64, phi: f64) -> [f64; 2] {
        let dd = if a == 0 { 0.0 } else { f64::from(a) * d.powi(a as i32 - 1) * phi.powi(b as i32) };
        let dp = if b == 0 { 0.0 } else { f64::from(b) * d.powi(a as i32) * phi.powi(b as i32 - 1) };
        [dd, dp]
    }

    pub fn gradient(&self, d: f64, phi: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&(a, b), c) in self.terms.iter().zip(&self.coefficients) {
            let t = Self::term_gradient(a, b, d, phi);
            g[0] += c * t[0];
            g[1] += c * t[1];
        }
        g
    }
}

/// Uniform rectangular grid over `(d, φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarGrid {
    pub d_range: [f64; 2],
    pub phi_range: [f64; 2],
    pub n_d: usize,
    pub n_phi: usize,
}

impl PlanarGrid {
    /// 41×41 over `d ∈ [−l/2, l/2]`, `φ ∈ [−π/2, π/2]`; `d` pinned to 0 when
    /// the model is unslotted.
    pub fn default_for(p: &BarFlywheelParams) -> Self {
        let half = 0.5 * p.bar_length;
        if p.slotted {
            Self { d_range: [-half, half], phi_range: [-FRAC_PI_2, FRAC_PI_2], n_d: 41, n_phi: 41 }
        } else {
            Self { d_range: [0.0, 0.0], phi_range: [-FRAC_PI_2, FRAC_PI_2], n_d: 1, n_phi: 41 }
        }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let lin = |r: [f64; 2], n: usize, i: usize| {
            if n == 1 {
                0.5 * (r[0] + r[1])
            } else {
                r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.n_d * self.n_phi);
        for i in 0..self.n_d {
            for k in 0..self.n_phi {
                out.push((lin(self.d_range, self.n_d, i), lin(self.phi_range, self.n_phi, k)));
            }
        }
        out
    }
}

/// Mean squared gradient-vs-connection residual of `psi` over the grid.
pub fn planar_fit_residual(p: &BarFlywheelParams, grid: &PlanarGrid, psi: &PlanarPsiFunction) -> f64 {
    let pts = grid.points();
    let total: f64 = pts
        .iter()
        .map(|&(d, phi)| {
            let g = psi.gradient(d, phi);
            let a = p.connection(d);
            (g[0] - a[0]).powi(2) + (g[1] - a[1]).powi(2)
        })
        .sum();
    total / pts.len() as f64
}

/// Least-squares fit of the gradient of `form` to the connection row over
/// the grid. Terms whose gradient vanishes on the whole grid keep a zero
/// coefficient; the remaining terms must be identifiable.
pub fn fit_planar_psi(
    p: &BarFlywheelParams,
    grid: &PlanarGrid,
    form: &PlanarPsiFunction,
) -> Result<PlanarPsiFunction, PlanarError> {
    p.validate()?;
    let pts = grid.points();
    if pts.is_empty() {
        return Err(PlanarError::EmptyGrid);
    }
    for &(d, _) in &pts {
        p.check_d(d)?;
    }
    let n_terms = form.terms.len();
    let mut design = DMatrix::zeros(2 * pts.len(), n_terms);
    let mut target = DVector::zeros(2 * pts.len());
    for (row, &(d, phi)) in pts.iter().enumerate() {
        for (k, &(a, b)) in form.terms.iter().enumerate() {
            let g = PlanarPsiFunction::term_gradient(a, b, d, phi);
            design[(2 * row, k)] = g[0];
            design[(2 * row + 1, k)] = g[1];
        }
        let conn = p.connection(d);
        target[2 * row] = conn[0];
        target[2 * row + 1] = conn[1];
    }
    let active: Vec<usize> = (0..n_terms).filter(|&k| design.column(k).amax() > 0.0).collect();
    let mut coefficients = vec![0.0; n_terms];
    if !active.is_empty() {
        let reduced = design.select_columns(active.iter());
        let svd = reduced.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = smax * 1e-12 * (reduced.nrows().max(reduced.ncols()) as f64);
        let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
        if rank < active.len() {
            return Err(PlanarError::RankDeficient { rank, terms: active.len() });
        }
        let x = svd.solve(&target, tol).expect("u and v were computed");
        for (i, &k) in active.iter().enumerate() {
            coefficients[k] = x[i];
        }
    }
    Ok(PlanarPsiFunction { terms: form.terms.clone(), coefficients })
}

/// The closed joint-space loop `(0,0) → (l/2,0) → (l/2,π/2) → (0,π/2) →
/// (0,0)` over `(d, φ)`, each leg lasting `segment_time`.
pub fn holonomy_cycle(p: &BarFlywheelParams, segment_time: f64) -> WaypointPath {
    let half = 0.5 * p.bar_length;
    let pts = [(0.0, 0.0), (half, 0.0), (half, FRAC_PI_2), (0.0, FRAC_PI_2), (0.0, 0.0)]
        .iter()
        .map(|&(d, phi)| DVector::from_vec(vec![d, phi]))
        .collect();
    WaypointPath::new(pts, segment_time).expect("five waypoints of equal length")
}

/// Net bar rotation after one traversal of [`holonomy_cycle`].
pub fn holonomy_closed_form(p: &BarFlywheelParams) -> f64 {
    let half = 0.5 * p.bar_length;
    FRAC_PI_2 * (p.connection(0.0)[1] - p.connection(half)[1])
}

/// One row of a reconstructed planar motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarTracePoint {
    pub t: f64,
    pub theta: f64,
    pub d: f64,
    pub phi: f64,
    /// `θ + ψ̃(d, φ)`.
    pub psi_wbo: f64,
    pub cam: f64,
}

/// Bar angle under zero momentum, `θ̇ = −A(d) [ḋ; φ̇]`, integrated with
/// fixed-step RK4. The trajectory provides `q = [d, φ]`.
pub fn reconstruct_planar<T: JointTrajectory + ?Sized>(
    p: &BarFlywheelParams,
    trajectory: &T,
    theta0: f64,
    steps: usize,
) -> Result<Vec<(f64, f64)>, PlanarError> {
    if trajectory.dim() != 2 {
        return Err(PlanarError::Integration(format!("expected q = [d, φ], got dimension {}", trajectory.dim())));
    }
    let (t0, t1) = trajectory.span();
    if steps == 0 || !(t1 > t0) {
        return Err(PlanarError::Integration(format!("span [{t0}, {t1}] with {steps} steps")));
    }
    let h = (t1 - t0) / steps as f64;
    let rate = |t: f64| {
        let (q, qd) = trajectory.state(t);
        let a = p.connection(q[0]);
        -(a[0] * qd[0] + a[1] * qd[1])
    };
    let mut theta = theta0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push((t0, theta));
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        // the rate does not depend on θ, so RK4 reduces to Simpson's rule
        let (k1, k2, k4) = (rate(t), rate(t + 0.5 * h), rate(t + h));
        theta += h / 6.0 * (k1 + 4.0 * k2 + k4);
        out.push((if k + 1 == steps { t1 } else { t + h }, theta));
    }
    Ok(out)
}

/// Reconstructed trace with the WBO angle and momentum at each step.
pub fn planar_trace<T: JointTrajectory + ?Sized>(
    p: &BarFlywheelParams,
    psi: &PlanarPsiFunction,
    trajectory: &T,
    steps: usize,
) -> Result<Vec<PlanarTracePoint>, PlanarError> {
    let thetas = reconstruct_planar(p, trajectory, 0.0, steps)?;
    Ok(thetas
        .iter()
        .map(|&(t, theta)| {
            let (q, qd) = trajectory.state(t);
            // momentum uses the exact zero-momentum bar rate
            let a = p.connection(q[0]);
            let theta_dot = -(a[0] * qd[0] + a[1] * qd[1]);
            let state = PlanarState { theta, d: q[0], phi: q[1], theta_dot, d_dot: qd[0], phi_dot: qd[1] };
            PlanarTracePoint {
                t,
                theta,
                d: q[0],
                phi: q[1],
                psi_wbo: theta + psi.eval(q[0], q[1]),
                cam: planar_cam(p, &state),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftStats {
    /// `max |Ψ̃(t) − Ψ̃(0)|`.
    pub max_drift: f64,
    pub rms_drift: f64,
    pub final_drift: f64,
}

/// Drift of `Ψ̃ = θ + ψ̃(d, φ)` along a zero-momentum motion.
pub fn wbo_drift<T: JointTrajectory + ?Sized>(
    p: &BarFlywheelParams,
    psi: &PlanarPsiFunction,
    trajectory: &T,
    steps: usize,
) -> Result<DriftStats, PlanarError> {
    let trace = planar_trace(p, psi, trajectory, steps)?;
    let start = trace[0].psi_wbo;
    let drifts: Vec<f64> = trace.iter().map(|r| (r.psi_wbo - start).abs()).collect();
    Ok(DriftStats {
        max_drift: drifts.iter().copied().fold(0.0, f64::max),
        rms_drift: (drifts.iter().map(|d| d * d).sum::<f64>() / drifts.len() as f64).sqrt(),
        final_drift: *drifts.last().expect("at least two points"),
    })
}

/// Smooth random flywheel motion (sum of sines) with `d = 0`.
pub fn random_flywheel_motion(seed: u64, duration: f64) -> FnTrajectory<impl Fn(f64) -> (DVector<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.2..3.0) * 2.0 * PI / duration, rng.random_range(0.0..2.0 * PI)))
        .collect();
    FnTrajectory::new(2, (0.0, duration), move |t| {
        let (mut phi, mut rate) = (0.0, 0.0);
        for &(amp, w, ph) in &modes {
            phi += amp * (w * t + ph).sin();
            rate += amp * w * (w * t + ph).cos();
        }
        (DVector::from_vec(vec![0.0, phi]), DVector::from_vec(vec![0.0, rate]))
    })
}

/// Three-dimensional embedding: the bar is the root, a massless carriage
/// slides along the bar's x axis (slotted only), and the flywheel spins
/// about z. All motion is about the z axis. `q = [d, φ]` when slotted,
/// `q = [φ]` otherwise.
pub fn embed_3d(p: &BarFlywheelParams) -> Result<RobotModel, PlanarError> {
    p.validate()?;
    let bad = |e| PlanarError::Model(ModelError::BadInertia { link: "planar".into(), source: e });
    // thin bar along x; flywheel disk in the xy plane
    let bar = SpatialInertia::from_entries(
        p.mass_bar,
        Vector3::zeros(),
        [1e-3 * p.inertia_bar, p.inertia_bar, p.inertia_bar, 0.0, 0.0, 0.0],
    )
    .map_err(bad)?;
    let fly = SpatialInertia::from_entries(
        p.mass_flywheel,
        Vector3::zeros(),
        [0.5 * p.inertia_flywheel, 0.5 * p.inertia_flywheel, p.inertia_flywheel, 0.0, 0.0, 0.0],
    )
    .map_err(bad)?;
    let half = 0.5 * p.bar_length;
    let mut links = vec![Link { name: "bar".into(), inertia: bar }];
    let mut joints = Vec::new();
    let fly_parent = if p.slotted {
        links.push(Link { name: "carriage".into(), inertia: SpatialInertia::massless() });
        joints.push(Joint {
            name: "slot".into(),
            parent: 0,
            child: 1,
            kind: JointKind::Prismatic,
            axis: Vector3::x(),
            origin: Pose::identity(),
            limits: [-half, half],
            neutral: 0.0,
            q_index: Some(0),
        });
        1
    } else {
        0
    };
    links.push(Link { name: "flywheel".into(), inertia: fly });
    joints.push(Joint {
        name: "wheel".into(),
        parent: fly_parent,
        child: links.len() - 1,
        kind: JointKind::Revolute,
        axis: Vector3::z(),
        origin: Pose::identity(),
        limits: [-PI, PI],
        neutral: 0.0,
        q_index: Some(joints.len()),
    });
    let name = if p.slotted { "slotted-bar-flywheel" } else { "bar-flywheel" };
    Ok(RobotModel::assemble(name.into(), links, joints, 0, None)?)
}
