//! Reproduction drivers: manufactured-solution convergence studies,
//! stability probe, relaxation to equilibrium and hysteresis loops.

pub mod magnetics;
pub mod manufactured;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{self, Dim, GridError, GridSpec, VectorField3};
use crate::linsolve::GmresConfig;
use crate::physics::{self, FieldTerms, Forcing, LlModel, MaterialParams, PhysicsError, RhsForm};
use crate::steppers::{builtin_tableau, imex_step, imex_step_stages, DiffusionSolver, SchemeId, StepConfig, StepError, Stepper};

pub use magnetics::*;
pub use manufactured::{ExactSample, ManufacturedProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{0}")]
    Invalid(String),
}

impl ExperimentError {
    /// True for failures of the computation itself (non-finite values,
    /// stalled solvers, degenerate magnetization) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ExperimentError::Step(StepError::NonFinite { .. } | StepError::Gmres { .. } | StepError::ZeroLength { .. } | StepError::Solve(_))
        )
    }
}

/// Errors of one run against the exact solution at the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub k: f64,
    pub h: f64,
    pub steps: usize,
    pub linf: f64,
    pub l2: f64,
    /// `(||e||^2 + ||grad_h m_h - grad m_e||^2)^(1/2)`: the discrete
    /// gradient of the solution against the exact gradient at cell centers.
    pub h1: f64,
    /// H1 norm of the error field with the centered gradient.
    pub h1_centered: f64,
    /// H1 norm of the error field with face differences.
    pub h1_face: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementAxis {
    Temporal,
    Spatial,
}

/// Fitted convergence orders per norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orders {
    pub linf: f64,
    pub l2: f64,
    pub h1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub scheme: SchemeId,
    pub axis: RefinementAxis,
    pub samples: Vec<ErrorSample>,
    /// Least-squares slopes over all samples.
    pub order: Orders,
    /// Slopes between consecutive samples.
    pub pairwise: Vec<Orders>,
}

impl ErrorReport {
    pub fn new(scheme: SchemeId, axis: RefinementAxis, samples: Vec<ErrorSample>) -> Result<Self, ExperimentError> {
        if samples.len() < 3 {
            return Err(ExperimentError::Invalid(format!("order fitting needs at least 3 samples, got {}", samples.len())));
        }
        let param: Vec<f64> = samples.iter().map(|s| if axis == RefinementAxis::Temporal { s.k } else { s.h }).collect();
        let increasing = param.windows(2).all(|w| w[1] > w[0]);
        let decreasing = param.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(ExperimentError::Invalid("refinement parameters must be strictly monotone".into()));
        }
        let col = |f: fn(&ErrorSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
        let (e_inf, e_2, e_h1) = (col(|s| s.linf), col(|s| s.l2), col(|s| s.h1));
        let order = Orders { linf: fit_order(&param, &e_inf)?, l2: fit_order(&param, &e_2)?, h1: fit_order(&param, &e_h1)? };
        let pair = |e: &[f64], i: usize| (e[i + 1] / e[i]).ln() / (param[i + 1] / param[i]).ln();
        let pairwise = (0..samples.len() - 1)
            .map(|i| Orders { linf: pair(&e_inf, i), l2: pair(&e_2, i), h1: pair(&e_h1, i) })
            .collect();
        Ok(Self { scheme, axis, samples, order, pairwise })
    }
}

/// Least-squares slope of `log(err)` against `log(param)`.
pub fn fit_order(param: &[f64], err: &[f64]) -> Result<f64, ExperimentError> {
    if param.len() != err.len() || param.len() < 2 {
        return Err(ExperimentError::Invalid("order fit needs matching series of length >= 2".into()));
    }
    if param.iter().chain(err).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(ExperimentError::Invalid("order fit needs positive finite values".into()));
    }
    let xs: Vec<f64> = param.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// How the refinement sequence is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum Refinement {
    /// Fixed cells per axis, varying step.
    Temporal { cells: usize, ks: Vec<f64> },
    /// Fixed step, varying cells per axis.
    Spatial { k: f64, cells: Vec<usize> },
    /// `k = c h^(2/3)` tied to the cells; errors are reported against `k`.
    Coupled { c: f64, cells: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    pub scheme: SchemeId,
    pub dim: Dim,
    pub alpha: f64,
    pub beta: f64,
    pub t_final: f64,
    pub refinement: Refinement,
    pub project: bool,
    pub gmres: GmresConfig,
}

impl ConvergenceSpec {
    pub fn new(scheme: SchemeId, dim: Dim, refinement: Refinement) -> Self {
        Self { scheme, dim, alpha: 0.01, beta: 5.0, t_final: 1.0, refinement, project: false, gmres: GmresConfig::default() }
    }
}

/// One manufactured-solution run.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedRun {
    pub scheme: SchemeId,
    pub dim: Dim,
    pub cells: usize,
    pub k: f64,
    pub t_final: f64,
    pub alpha: f64,
    pub beta: f64,
    pub project: bool,
    pub gmres: GmresConfig,
}

impl ManufacturedRun {
    pub fn grid(&self) -> Result<GridSpec, GridError> {
        match self.dim {
            Dim::One => GridSpec::unit_1d(self.cells),
            Dim::Three => GridSpec::unit_cube(self.cells),
        }
    }

    /// Number of steps and the adjusted step landing exactly on `t_final`.
    pub fn steps(&self) -> (usize, f64) {
        let n = (self.t_final / self.k).round().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }

    pub fn model(&self) -> Result<LlModel, ExperimentError> {
        let grid = self.grid()?;
        let problem = ManufacturedProblem::new(self.dim, self.alpha);
        let terms = FieldTerms::exchange_only().with_forcing(Forcing::new(move |t, x| problem.forcing(x, t)));
        let params = MaterialParams::dimensionless(1.0, 0.0, self.alpha, self.beta);
        Ok(LlModel::new(grid, params, terms, RhsForm::Equivalent)?)
    }

    /// Runs to `t_final` and returns the stepper's final field.
    pub fn solve(&self) -> Result<(VectorField3, usize, f64), ExperimentError> {
        let grid = self.grid()?;
        let (n, k) = self.steps();
        let problem = ManufacturedProblem::new(self.dim, self.alpha);
        let m0 = VectorField3::from_fn(grid, |x| problem.exact(x, 0.0));
        let mut cfg = StepConfig::new(self.scheme, k).projected(self.project);
        cfg.gmres = self.gmres.clone();
        let mut stepper = Stepper::new(self.model()?, cfg, m0, 0.0)?;
        for _ in 0..n {
            stepper.step()?;
        }
        Ok((stepper.m().clone(), n, k))
    }

    pub fn run(&self) -> Result<ErrorSample, ExperimentError> {
        let start = Instant::now();
        let (m, steps, k) = self.solve()?;
        let wall_seconds = start.elapsed().as_secs_f64();
        let problem = ManufacturedProblem::new(self.dim, self.alpha);
        Ok(error_sample(&m, |x| problem.sample(x, steps as f64 * k), k, steps, wall_seconds))
    }
}

/// Errors of `m` against an exact solution given pointwise.
pub fn error_sample(m: &VectorField3, exact: impl Fn([f64; 3]) -> ExactSample, k: f64, steps: usize, wall_seconds: f64) -> ErrorSample {
    let grid = *m.grid();
    let [nx, ny, nz] = grid.n();
    let mut ex = VectorField3::zeros(grid);
    let grad = grid::gradient(m);
    let mut grad_err = 0.0;
    let mut idx = 0;
    for kk in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let s = exact(grid.center(i, j, kk));
                ex.set(grid.cell(i, j, kk), s.m);
                for a in 0..grid.axes() {
                    for q in 0..3 {
                        let d = grad.get(idx, a, q) - s.grad[a][q];
                        grad_err += d * d;
                    }
                }
                idx += 1;
            }
        }
    }
    ex.fill_ghosts();
    let e = grid::norms(&grid::difference(m, &ex));
    let h1 = (e.l2 * e.l2 + grid.cell_volume() * grad_err).sqrt();
    ErrorSample { k, h: grid.h()[0], steps, linf: e.linf, l2: e.l2, h1, h1_centered: e.h1, h1_face: e.h1_face, wall_seconds }
}

pub fn convergence_study(spec: &ConvergenceSpec) -> Result<ErrorReport, ExperimentError> {
    let run = |cells: usize, k: f64| ManufacturedRun {
        scheme: spec.scheme,
        dim: spec.dim,
        cells,
        k,
        t_final: spec.t_final,
        alpha: spec.alpha,
        beta: spec.beta,
        project: spec.project,
        gmres: spec.gmres.clone(),
    };
    let (axis, runs): (RefinementAxis, Vec<ManufacturedRun>) = match &spec.refinement {
        Refinement::Temporal { cells, ks } => (RefinementAxis::Temporal, ks.iter().map(|&k| run(*cells, k)).collect()),
        Refinement::Spatial { k, cells } => (RefinementAxis::Spatial, cells.iter().map(|&n| run(n, *k)).collect()),
        Refinement::Coupled { c, cells } => (
            RefinementAxis::Temporal,
            cells.iter().map(|&n| run(n, c * (1.0 / n as f64).powf(2.0 / 3.0))).collect(),
        ),
    };
    let samples = runs.iter().map(ManufacturedRun::run).collect::<Result<Vec<_>, _>>()?;
    ErrorReport::new(spec.scheme, axis, samples)
}

/// One entry of an artificial-damping sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSweepRow {
    pub beta: f64,
    pub alpha: f64,
    pub sample: ErrorSample,
}

/// Errors at a single `(k, h)` for every `(beta, alpha)` pair.
pub fn beta_sweep(
    scheme: SchemeId,
    betas: &[f64],
    alphas: &[f64],
    dim: Dim,
    cells: usize,
    k: f64,
    t_final: f64,
) -> Result<Vec<BetaSweepRow>, ExperimentError> {
    if betas.is_empty() || alphas.is_empty() {
        return Err(ExperimentError::Invalid("beta and alpha lists must be nonempty".into()));
    }
    let mut rows = Vec::new();
    for &alpha in alphas {
        for &beta in betas {
            let run = ManufacturedRun { scheme, dim, cells, k, t_final, alpha, beta, project: false, gmres: GmresConfig::default() };
            rows.push(BetaSweepRow { beta, alpha, sample: run.run()? });
        }
    }
    Ok(rows)
}

/// SSP-IMEX-RK2 applied to the damping-only model with `beta = alpha`
/// (unit exchange), the explicit part being
/// `beta |A_h grad_h m|^2 m - alpha m x (m x f) + g`.
pub fn simplified_model_error(dim: Dim, cells: usize, k: f64, t_final: f64, alpha: f64) -> Result<ErrorSample, ExperimentError> {
    let grid = match dim {
        Dim::One => GridSpec::unit_1d(cells)?,
        Dim::Three => GridSpec::unit_cube(cells)?,
    };
    let problem = ManufacturedProblem::new(dim, alpha);
    let params = MaterialParams::dimensionless(1.0, 0.0, alpha, alpha);
    let zero = VectorField3::zeros(grid);
    let tab = builtin_tableau(SchemeId::SspImexRk2)?;
    let mut diffusion = DiffusionSolver::new(grid, params.beta);
    let mut explicit = |t: f64, m: &VectorField3| -> Result<VectorField3, StepError> {
        let mut n = physics::rhs_simplified(m, &params, &zero);
        n.axpy(1.0, &VectorField3::from_fn(grid, |x| problem.damping_only_forcing(x, t)));
        n.fill_ghosts();
        Ok(n)
    };
    let steps = (t_final / k).round().max(1.0) as usize;
    let k = t_final / steps as f64;
    let start = Instant::now();
    let mut m = VectorField3::from_fn(grid, |x| problem.exact(x, 0.0));
    for n in 0..steps {
        m = imex_step(&tab, &m, n as f64 * k, k, &mut diffusion, &mut explicit)?;
    }
    let wall_seconds = start.elapsed().as_secs_f64();
    Ok(error_sample(&m, |x| problem.sample(x, steps as f64 * k), k, steps, wall_seconds))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub grid: GridSpec,
    pub beta: f64,
    /// Step sizes as multiples of `h^2`.
    pub k_over_h2: Vec<f64>,
    pub n_steps: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityCheck {
    /// Per-step energy inequality.
    Step,
    /// `||m_n|| + (beta/12 k sum ||grad m_j||^2)^(1/2) <= ||m_0||`.
    Cumulative,
    /// `||m_n||^2 + beta/12 k sum ||grad m_j||^2 <= ||m_0||^2`.
    CumulativeSquared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityViolation {
    pub trial: usize,
    pub k: f64,
    pub step: usize,
    pub check: StabilityCheck,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub runs: usize,
    pub max_step_excess: f64,
    pub max_cumulative_excess: f64,
    pub max_cumulative_sq_excess: f64,
    pub violations: Vec<StabilityViolation>,
}

/// Slack allowed for rounding in the stability inequalities.
pub const STABILITY_SLACK: f64 = 1e-10;

/// Random field with components uniform in `[-1, 1]`.
pub fn random_field(grid: GridSpec, rng: &mut impl Rng) -> VectorField3 {
    VectorField3::from_fn(grid, |_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
}

/// SSP-IMEX-RK2 on pure diffusion (`N = 0`) from random data, checking the
/// per-step and telescoped energy inequalities. Gradient norms use face
/// differences, for which `<-lap_h f, f> = ||grad_h f||^2` holds exactly.
pub fn stability_probe(cfg: &StabilityConfig) -> Result<StabilityReport, ExperimentError> {
    let tab = builtin_tableau(SchemeId::SspImexRk2)?;
    let grid = cfg.grid;
    let h = grid.h()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grad_sq = |f: &VectorField3| grid::tensor_norm_sq(&grid::face_gradient(f));
    let l2_sq = |f: &VectorField3| {
        let v = grid::l2_norm(f);
        v * v
    };
    let mut report = StabilityReport {
        runs: 0,
        max_step_excess: f64::NEG_INFINITY,
        max_cumulative_excess: f64::NEG_INFINITY,
        max_cumulative_sq_excess: f64::NEG_INFINITY,
        violations: Vec::new(),
    };
    let beta = cfg.beta;
    let mut zero_n = |_t: f64, m: &VectorField3| -> Result<VectorField3, StepError> { Ok(VectorField3::zeros(*m.grid())) };
    for &ratio in &cfg.k_over_h2 {
        let k = ratio * h * h;
        let mut diffusion = DiffusionSolver::new(grid, beta);
        for trial in 0..cfg.trials {
            let mut m = random_field(grid, &mut rng);
            let m0_sq = l2_sq(&m);
            let mut sum_grad = 0.0;
            for step in 1..=cfg.n_steps {
                let (next, stages) = imex_step_stages(&tab, &m, 0.0, k, &mut diffusion, &mut zero_n)?;
                let g_next = grad_sq(&next);
                let lhs = l2_sq(&next) - l2_sq(&m)
                    + beta / 36.0 * k * grad_sq(&stages[1])
                    + beta / 6.0 * k * grad_sq(&stages[2])
                    + beta / 12.0 * k * g_next;
                sum_grad += g_next;
                let tail = beta / 12.0 * k * sum_grad;
                let next_sq = l2_sq(&next);
                let cum = next_sq.sqrt() + tail.sqrt() - m0_sq.sqrt();
                let cum_sq = next_sq + tail - m0_sq;
                for (check, excess) in [
                    (StabilityCheck::Step, lhs),
                    (StabilityCheck::Cumulative, cum),
                    (StabilityCheck::CumulativeSquared, cum_sq),
                ] {
                    let slot = match check {
                        StabilityCheck::Step => &mut report.max_step_excess,
                        StabilityCheck::Cumulative => &mut report.max_cumulative_excess,
                        StabilityCheck::CumulativeSquared => &mut report.max_cumulative_sq_excess,
                    };
                    *slot = slot.max(excess);
                    if excess > STABILITY_SLACK {
                        report.violations.push(StabilityViolation { trial, k, step, check, excess });
                    }
                }
                m = next;
            }
            report.runs += 1;
        }
    }
    Ok(report)
}

/// Cheapest wall time reaching `target` along the Pareto front.
///
/// Samples are ordered by time and only those improving on every faster run
/// are kept. Between the last front point above `target` and the first at or
/// below it the time is interpolated log-log; a front already below `target`
/// at its fastest point returns that time.
pub fn time_to_error(samples: &[ErrorSample], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.wall_seconds.max(1e-9), s.linf)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut front: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        if front.last().is_none_or(|l| p.1 < l.1) {
            front.push(p);
        }
    }
    let first = front.first()?;
    if first.1 <= target {
        return Some(first.0);
    }
    front.windows(2).find(|w| w[1].1 <= target).map(|w| {
        let ((t0, e0), (t1, e1)) = (w[0], w[1]);
        let s = (target.ln() - e0.ln()) / (e1.ln() - e0.ln());
        (t0.ln() + s * (t1.ln() - t0.ln())).exp()
    })
}

/// Error against wall time for several schemes on the same problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyTable {
    pub rows: Vec<(SchemeId, Vec<ErrorSample>)>,
    /// Runs that failed, with the step size and the error message.
    pub failures: Vec<(SchemeId, f64, String)>,
}

impl EfficiencyTable {
    /// Scheme reaching `target` first, with the interpolated times.
    pub fn fastest_at(&self, target: f64) -> Vec<(SchemeId, Option<f64>)> {
        self.rows.iter().map(|(id, s)| (*id, time_to_error(s, target))).collect()
    }

    /// Non-dominated samples per scheme (smaller error and time are better).
    pub fn pareto(&self) -> Vec<(SchemeId, Vec<ErrorSample>)> {
        self.rows
            .iter()
            .map(|(id, samples)| {
                let front = samples
                    .iter()
                    .filter(|a| {
                        !samples.iter().any(|b| {
                            b.linf <= a.linf && b.wall_seconds <= a.wall_seconds && (b.linf < a.linf || b.wall_seconds < a.wall_seconds)
                        })
                    })
                    .copied()
                    .collect();
                (*id, front)
            })
            .collect()
    }
}

/// Temporal sweeps of several schemes on the manufactured problem.
///
/// Each run is repeated `repeats` times and the fastest wall time is kept.
/// A failing run is recorded and the sweep continues.
pub fn efficiency_bench(
    schemes: &[SchemeId],
    dim: Dim,
    cells: usize,
    ks: &[f64],
    t_final: f64,
    repeats: usize,
) -> Result<EfficiencyTable, ExperimentError> {
    if schemes.is_empty() || ks.is_empty() {
        return Err(ExperimentError::Invalid("efficiency bench needs at least one scheme and one step".into()));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &scheme in schemes {
        let mut samples = Vec::new();
        'ks: for &k in ks {
            let run = ManufacturedRun { scheme, dim, cells, k, t_final, alpha: 0.01, beta: 5.0, project: false, gmres: GmresConfig::default() };
            let mut best: Option<ErrorSample> = None;
            for _ in 0..repeats.max(1) {
                match run.run() {
                    Ok(s) => {
                        if best.is_none_or(|b| s.wall_seconds < b.wall_seconds) {
                            best = Some(s);
                        }
                    }
                    Err(e) => {
                        failures.push((scheme, k, e.to_string()));
                        continue 'ks;
                    }
                }
            }
            samples.extend(best);
        }
        rows.push((scheme, samples));
    }
    Ok(EfficiencyTable { rows, failures })
}
