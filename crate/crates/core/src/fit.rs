//! Fitting `Θ` by alternating between freezing `T_Q` at the current
//! coefficients and solving the resulting linear least-squares problem.
//!
//! Cost: `(1/N) Σ ‖A_i − T_Qi Θ J_λi‖²_F`. With `T` frozen,
//! `vec(T Θ J) = (Jᵀ ⊗ T) vec(Θ)`, so the normal matrix is
//! `Σ (J Jᵀ) ⊗ (Tᵀ T)` and the right-hand side is `Σ vec(Tᵀ A Jᵀ)`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisError, MonomialBasis};
use crate::centroidal::{local_connection, CentroidalError, LocalConnectionSample};
use crate::model::{Configuration, ModelError, RobotModel};
use crate::orientation::{t_matrix_of, WboError, WboFunction};

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Centroidal(#[from] CentroidalError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("sample {sample}: {source}")]
    Domain { sample: usize, source: WboError },
    #[error("normal equations are singular; use a ridge > 0")]
    SingularNormal,
    #[error("normal equations could not be factorized (ridge {ridge:e})")]
    Factorization { ridge: f64 },
    #[error("no samples")]
    NoSamples,
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("iteration {iteration}: {source}")]
    AtIteration { iteration: usize, source: Box<FitError> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Base sample count (doubled when `mirror` is set).
    pub n_samples: usize,
    pub seed: u64,
    pub mirror: bool,
    pub degree: u32,
    /// Tikhonov weight on `‖Θ‖²_F` in the summed cost. `None` uses `1e-12·N`.
    pub ridge: Option<f64>,
    pub max_iters: usize,
    pub tol_theta: f64,
    pub tol_cost: f64,
    pub prune_threshold: f64,
    /// Held-out configurations used for the velocity error metric.
    pub n_probes: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            seed: 0,
            mirror: false,
            degree: 3,
            ridge: None,
            max_iters: 50,
            tol_theta: 1e-9,
            tol_cost: 1e-10,
            prune_threshold: 1e-8,
            n_probes: 200,
        }
    }
}

impl FitSettings {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::Settings(m.into()));
        if self.n_samples == 0 {
            return bad("n_samples must be >= 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1");
        }
        if !(self.tol_theta > 0.0 && self.tol_cost > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.prune_threshold >= 0.0) {
            return bad("prune_threshold must be >= 0");
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0) {
                return bad("ridge must be >= 0");
            }
        }
        Ok(())
    }

    pub fn ridge_for(&self, n: usize) -> f64 {
        self.ridge.unwrap_or(1e-12 * n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// A step raised the cost even after halving; the last good `Θ` is kept.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub status: FitStatus,
    /// Cost at `Θ = 0` followed by the cost after each accepted iteration.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub n_samples: usize,
    pub n_basis: usize,
    pub ridge: f64,
    pub step_halvings: usize,
    pub n_terms_before_prune: usize,
    pub n_terms_after_prune: usize,
    pub cost_before_prune: f64,
    pub cost_after_prune: f64,
    /// Per-axis RMS of `(A − Ã) q̇` over held-out probes, rad/s.
    pub probe_rms: [f64; 3],
    pub n_probes: usize,
    pub wall_time_s: f64,
}

/// Local connection and basis Jacobian for each configuration, in order.
pub fn prepare_samples(
    model: &RobotModel,
    basis: &MonomialBasis,
    configs: &[Configuration],
) -> Result<Vec<LocalConnectionSample>, FitError> {
    configs
        .par_iter()
        .map(|cfg| {
            let mut s = local_connection(model, cfg)?;
            s.basis_jacobian = Some(basis.jacobian(&cfg.q)?);
            Ok(s)
        })
        .collect()
}

fn jacobian_of<'a>(
    basis: &MonomialBasis,
    s: &'a LocalConnectionSample,
) -> Result<std::borrow::Cow<'a, DMatrix<f64>>, FitError> {
    Ok(match &s.basis_jacobian {
        Some(j) => std::borrow::Cow::Borrowed(j),
        None => std::borrow::Cow::Owned(basis.jacobian(&s.q)?),
    })
}

/// `T_Q` at every sample for the given coefficients.
pub fn frozen_t(samples: &[LocalConnectionSample], wbo: &WboFunction) -> Result<Vec<Matrix3<f64>>, FitError> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let q = wbo.eval_q(&s.q).map_err(|source| FitError::Domain { sample: i, source })?;
            t_matrix_of(&q).map_err(|source| FitError::Domain { sample: i, source })
        })
        .collect()
}

fn sample_residual(
    wbo: &WboFunction,
    s: &LocalConnectionSample,
    i: usize,
) -> Result<f64, FitError> {
    let basis = wbo.basis();
    let lambda = basis.eval(&s.q)?;
    let quat = wbo.quaternion_from_features(&lambda).map_err(|source| FitError::Domain { sample: i, source })?;
    let t = t_matrix_of(&quat).map_err(|source| FitError::Domain { sample: i, source })?;
    let j = jacobian_of(basis, s)?;
    let theta_j = wbo.theta() * j.as_ref();
    let approx = DMatrix::from_column_slice(3, 3, t.as_slice()) * theta_j;
    Ok(s.a.iter().zip(approx.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Mean squared Frobenius residual with the current `Θ` inside both `T_Q`
/// and the linear term.
pub fn objective(samples: &[LocalConnectionSample], wbo: &WboFunction) -> Result<f64, FitError> {
    if samples.is_empty() {
        return Err(FitError::NoSamples);
    }
    let terms: Vec<f64> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| sample_residual(wbo, s, i))
        .collect::<Result<_, _>>()?;
    Ok(terms.iter().sum::<f64>() / samples.len() as f64)
}

/// Normal-equation blocks over one contiguous run of samples:
/// `C_rc = Σ (TᵀT)_rc J Jᵀ` for the six `r <= c` and `R = Σ Tᵀ A Jᵀ`.
struct Partial {
    blocks: [DMatrix<f64>; 6],
    rhs: DMatrix<f64>,
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn accumulate(
    basis: &MonomialBasis,
    samples: &[LocalConnectionSample],
    t: &[Matrix3<f64>],
) -> Result<Partial, FitError> {
    let n = basis.len();
    let mut blocks = std::array::from_fn(|_| DMatrix::zeros(n, n));
    let mut rhs = DMatrix::zeros(3, n);
    let mut jjt = DMatrix::zeros(n, n);
    for (s, t) in samples.iter().zip(t) {
        let j = jacobian_of(basis, s)?;
        let j = j.as_ref();
        jjt.gemm(1.0, j, &j.transpose(), 0.0);
        let tt = t.transpose() * t;
        for (block, &(r, c)) in blocks.iter_mut().zip(&PAIRS) {
            let w = tt[(r, c)];
            block.zip_apply(&jjt, |b, x| *b += w * x);
        }
        let ta = DMatrix::from_column_slice(3, 3, t.transpose().as_slice()) * &s.a;
        rhs.gemm(1.0, &ta, &j.transpose(), 1.0);
    }
    Ok(Partial { blocks, rhs })
}

/// Number of partial accumulators; depends only on the problem size so the
/// reduction order is independent of the worker count.
fn chunk_count(n_samples: usize, n_basis: usize) -> usize {
    let bytes = 6 * n_basis * n_basis * 8;
    let by_memory = (512usize << 20) / bytes.max(1);
    by_memory.clamp(1, 16).min(n_samples)
}

/// Minimizer of `Σ ‖A_i − T_i Θ J_i‖²_F + ridge ‖Θ‖²_F` for frozen `T_i`.
pub fn linear_step(
    basis: &MonomialBasis,
    samples: &[LocalConnectionSample],
    t_frozen: &[Matrix3<f64>],
    ridge: f64,
) -> Result<DMatrix<f64>, FitError> {
    if samples.is_empty() {
        return Err(FitError::NoSamples);
    }
    if t_frozen.len() != samples.len() {
        return Err(FitError::Settings("one T_Q per sample required".into()));
    }
    let n = basis.len();
    let chunk = samples.len().div_ceil(chunk_count(samples.len(), n));
    let partials: Vec<Partial> = samples
        .par_chunks(chunk)
        .zip(t_frozen.par_chunks(chunk))
        .map(|(s, t)| accumulate(basis, s, t))
        .collect::<Result<_, _>>()?;
    let mut total = Partial { blocks: std::array::from_fn(|_| DMatrix::zeros(n, n)), rhs: DMatrix::zeros(3, n) };
    for p in &partials {
        for (acc, b) in total.blocks.iter_mut().zip(&p.blocks) {
            *acc += b;
        }
        total.rhs += &p.rhs;
    }

    let dim = 3 * n;
    let mut g = DMatrix::zeros(dim, dim);
    for (block, &(r, c)) in total.blocks.iter().zip(&PAIRS) {
        for l in 0..n {
            for k in 0..n {
                let v = block[(k, l)];
                g[(3 * k + r, 3 * l + c)] = v;
                g[(3 * k + c, 3 * l + r)] = v;
            }
        }
    }
    let mut max_diag: f64 = 0.0;
    for i in 0..dim {
        max_diag = max_diag.max(g[(i, i)]);
        g[(i, i)] += ridge;
    }
    // column-major vec(Θ): entry (r, k) sits at 3k + r
    let b = DVector::from_column_slice(total.rhs.as_slice());
    let chol = match g.cholesky() {
        Some(c) => c,
        None if ridge == 0.0 => return Err(FitError::SingularNormal),
        None => return Err(FitError::Factorization { ridge }),
    };
    if ridge == 0.0 {
        let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
        if min_pivot <= 1e-14 * max_diag {
            return Err(FitError::SingularNormal);
        }
    }
    let x = chol.solve(&b);
    Ok(DMatrix::from_column_slice(3, n, x.as_slice()))
}

fn frobenius_rel_step(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    let d = (new - old).norm();
    if d == 0.0 {
        0.0
    } else {
        d / new.norm().max(old.norm())
    }
}

/// Outcome of the iteration before pruning and reporting.
#[derive(Debug, Clone)]
pub struct IterationResult {
    pub theta: DMatrix<f64>,
    pub cost_trace: Vec<f64>,
    pub status: FitStatus,
    pub step_halvings: usize,
}

/// Runs the freeze-and-solve iteration from `Θ = 0` on prepared samples.
pub fn iterate(
    basis: &MonomialBasis,
    samples: &[LocalConnectionSample],
    settings: &FitSettings,
) -> Result<IterationResult, FitError> {
    settings.validate()?;
    let ridge = settings.ridge_for(samples.len());
    let mut wbo = WboFunction::identity(basis.clone());
    let mut cost = objective(samples, &wbo)?;
    let mut trace = vec![cost];
    let mut halvings = 0;
    let mut status = FitStatus::MaxIterations;
    let at = |iteration: usize| move |e: FitError| FitError::AtIteration { iteration, source: Box::new(e) };

    for iteration in 1..=settings.max_iters {
        let t = frozen_t(samples, &wbo).map_err(at(iteration))?;
        let solved = linear_step(basis, samples, &t, ridge).map_err(at(iteration))?;
        let evaluate = |theta: &DMatrix<f64>| -> Result<f64, FitError> {
            let cand = wbo.with_theta(theta.clone()).expect("shape preserved");
            match objective(samples, &cand) {
                Ok(c) => Ok(c),
                Err(FitError::Domain { .. }) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        };
        let mut candidate = solved;
        let mut new_cost = evaluate(&candidate).map_err(at(iteration))?;
        let mut k = 0;
        while !(new_cost <= cost) && k < 10 {
            k += 1;
            halvings += 1;
            candidate = wbo.theta() + (&candidate - wbo.theta()) * 0.5;
            new_cost = evaluate(&candidate).map_err(at(iteration))?;
        }
        if !(new_cost <= cost) {
            status = FitStatus::Stalled;
            break;
        }
        let step = frobenius_rel_step(&candidate, wbo.theta());
        let decrease = if cost > 0.0 { (cost - new_cost) / cost } else { 0.0 };
        wbo = wbo.with_theta(candidate).expect("shape preserved");
        cost = new_cost;
        trace.push(cost);
        if step < settings.tol_theta || decrease < settings.tol_cost {
            status = FitStatus::Converged;
            break;
        }
    }
    Ok(IterationResult { theta: wbo.theta().clone(), cost_trace: trace, status, step_halvings: halvings })
}

/// Per-axis RMS of `(A − Ã) q̇` on `n` held-out configurations with
/// uniform rates in `[-1, 1]`.
pub fn probe_rms(
    model: &RobotModel,
    wbo: &WboFunction,
    n: usize,
    seed: u64,
) -> Result<[f64; 3], FitError> {
    if n == 0 || model.n_q() == 0 {
        return Ok([0.0; 3]);
    }
    let configs = model.sample_configurations(n, seed, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let rates: Vec<DVector<f64>> =
        (0..n).map(|_| DVector::from_fn(model.n_q(), |_, _| rng.random_range(-1.0..=1.0))).collect();
    let errs: Vec<[f64; 3]> = configs
        .par_iter()
        .zip(rates.par_iter())
        .enumerate()
        .map(|(i, (cfg, qd))| {
            let a: Matrix3xX<f64> = local_connection(model, cfg)?.a;
            let om = wbo.omega_wbo(&cfg.q, qd).map_err(|source| FitError::Domain { sample: i, source })?;
            let e = a * qd - om;
            Ok([e[0] * e[0], e[1] * e[1], e[2] * e[2]])
        })
        .collect::<Result<_, FitError>>()?;
    let mut out = [0.0; 3];
    for e in &errs {
        for k in 0..3 {
            out[k] += e[k];
        }
    }
    Ok(out.map(|s| (s / n as f64).sqrt()))
}

/// Seed of the held-out probe stream, derived from the sampling seed.
pub fn probe_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Samples configurations, fits `Θ`, prunes and reports.
pub fn fit_wbo(model: &RobotModel, settings: &FitSettings) -> Result<(WboFunction, FitReport), FitError> {
    settings.validate()?;
    let start = Instant::now();
    let basis = MonomialBasis::new(model.n_q(), settings.degree)?;
    let configs = model.sample_configurations(settings.n_samples, settings.seed, settings.mirror)?;
    let samples = prepare_samples(model, &basis, &configs)?;
    let result = iterate(&basis, &samples, settings)?;

    let mut wbo = WboFunction::new(basis, result.theta).expect("shape preserved");
    let cost_before_prune = *result.cost_trace.last().expect("trace has the initial cost");
    let n_terms_before_prune = wbo.nonzero_terms();
    let n_terms_after_prune = wbo.prune(settings.prune_threshold);
    let cost_after_prune = objective(&samples, &wbo)?;
    let probe_rms = probe_rms(model, &wbo, settings.n_probes, probe_seed(settings.seed))?;

    let report = FitReport {
        status: result.status,
        iterations: result.cost_trace.len() - 1,
        cost_trace: result.cost_trace,
        n_samples: samples.len(),
        n_basis: wbo.basis().len(),
        ridge: settings.ridge_for(samples.len()),
        step_halvings: result.step_halvings,
        n_terms_before_prune,
        n_terms_after_prune,
        cost_before_prune,
        cost_after_prune,
        probe_rms,
        n_probes: settings.n_probes,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((wbo, report))
}
