//! Time integrators: a tableau-driven IMEX Runge-Kutta loop, the two BDF2
//! variants, pointwise projection and multistep startup.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::{self, GridSpec, VectorField3};
use crate::linsolve::{gmres_solve_preconditioned, GmresConfig, HelmholtzPlan, SolveError};
use crate::physics::{cross, dot, LlModel, PhysicsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("magnetization length {norm:e} below 1e-8 at cell {cell:?}")]
    ZeroLength { cell: [usize; 3], norm: f64 },
    #[error("{0} is not an IMEX Runge-Kutta scheme")]
    NotImex(SchemeId),
    #[error("GMRES did not converge: {iters} iterations, relative residual {rel_residual:e}{}", .diagnostic.as_deref().map(|d| format!(" ({d})")).unwrap_or_default())]
    Gmres { iters: usize, rel_residual: f64, diagnostic: Option<String> },
    #[error("non-finite magnetization at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid tableau: {0}")]
    BadTableau(String),
    #[error("invalid step size {0}")]
    BadStep(f64),
}

/// Cells whose magnetization is shorter than this cannot be projected.
pub const MIN_PROJECT_LENGTH: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    ImexRk2,
    ImexRk3,
    SspImexRk2,
    Bdf2,
    Bdf2Ld,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [SchemeId::ImexRk2, SchemeId::ImexRk3, SchemeId::SspImexRk2, SchemeId::Bdf2, SchemeId::Bdf2Ld];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::ImexRk2 => "imexrk2",
            SchemeId::ImexRk3 => "imexrk3",
            SchemeId::SspImexRk2 => "ssp",
            SchemeId::Bdf2 => "bdf2",
            SchemeId::Bdf2Ld => "bdf2ld",
        }
    }

    pub fn is_imex(self) -> bool {
        matches!(self, SchemeId::ImexRk2 | SchemeId::ImexRk3 | SchemeId::SspImexRk2)
    }

    pub fn is_multistep(self) -> bool {
        !self.is_imex()
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "imexrk2" | "rk2" => Ok(SchemeId::ImexRk2),
            "imexrk3" | "rk3" => Ok(SchemeId::ImexRk3),
            "ssp" | "sspimexrk2" | "ssprk2" => Ok(SchemeId::SspImexRk2),
            "bdf2" => Ok(SchemeId::Bdf2),
            "bdf2ld" => Ok(SchemeId::Bdf2Ld),
            _ => Err(format!("unknown scheme '{s}' (expected one of imexrk2, imexrk3, ssp, bdf2, bdf2ld)")),
        }
    }
}

/// Paired diagonally implicit / explicit Runge-Kutta tableaux.
///
/// `c[j]` is the time offset (in units of `k`) at which the explicit part
/// is evaluated on stage `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherPair {
    pub c: Vec<f64>,
    pub a_im: Vec<Vec<f64>>,
    pub b_im: Vec<f64>,
    pub a_ex: Vec<Vec<f64>>,
    pub b_ex: Vec<f64>,
}

impl ButcherPair {
    pub fn new(c: Vec<f64>, a_im: Vec<Vec<f64>>, b_im: Vec<f64>, a_ex: Vec<Vec<f64>>, b_ex: Vec<f64>) -> Result<Self, StepError> {
        let tab = Self { c, a_im, b_im, a_ex, b_ex };
        tab.validate()?;
        Ok(tab)
    }

    pub fn stages(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), StepError> {
        let s = self.c.len();
        let bad = |m: String| Err(StepError::BadTableau(m));
        if s == 0 {
            return bad("no stages".into());
        }
        if self.a_im.len() != s || self.a_ex.len() != s || self.b_im.len() != s || self.b_ex.len() != s {
            return bad("inconsistent stage counts".into());
        }
        for i in 0..s {
            if self.a_im[i].len() != s || self.a_ex[i].len() != s {
                return bad(format!("row {i} has the wrong length"));
            }
            for j in i..s {
                if self.a_ex[i][j] != 0.0 {
                    return bad(format!("explicit entry ({i},{j}) on or above the diagonal"));
                }
                if j > i && self.a_im[i][j] != 0.0 {
                    return bad(format!("implicit entry ({i},{j}) above the diagonal"));
                }
            }
            if self.a_im[i][i] < 0.0 {
                return bad(format!("negative implicit diagonal in row {i}"));
            }
            let (ri, re): (f64, f64) = (self.a_im[i].iter().sum(), self.a_ex[i].iter().sum());
            if ri > 1.0 + 1e-12 || re > 1.0 + 1e-12 {
                return bad(format!("row {i} sums exceed one"));
            }
        }
        Ok(())
    }

    /// Final implicit and explicit rows coincide with the weights, so the
    /// last stage is the step result.
    pub fn is_stiffly_accurate(&self) -> bool {
        let s = self.stages();
        self.a_im[s - 1] == self.b_im && self.a_ex[s - 1] == self.b_ex
    }
}

pub fn builtin_tableau(id: SchemeId) -> Result<ButcherPair, StepError> {
    let tab = match id {
        SchemeId::ImexRk2 => ButcherPair {
            c: vec![0.0, 0.5, 1.0],
            a_im: vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.5, 0.0], vec![0.5, 0.0, 0.5]],
            b_im: vec![0.5, 0.0, 0.5],
            a_ex: vec![vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            b_ex: vec![0.0, 1.0, 0.0],
        },
        SchemeId::ImexRk3 => ButcherPair {
            c: vec![0.0, 0.5, 2.0 / 3.0, 0.5, 1.0],
            a_im: vec![
                vec![0.0; 5],
                vec![0.0, 0.5, 0.0, 0.0, 0.0],
                vec![0.0, 1.0 / 6.0, 0.5, 0.0, 0.0],
                vec![0.0, -0.5, 0.5, 0.5, 0.0],
                vec![0.0, 1.5, -1.5, 0.5, 0.5],
            ],
            b_im: vec![0.0, 1.5, -1.5, 0.5, 0.5],
            a_ex: vec![
                vec![0.0; 5],
                vec![0.5, 0.0, 0.0, 0.0, 0.0],
                vec![11.0 / 18.0, 1.0 / 18.0, 0.0, 0.0, 0.0],
                vec![5.0 / 6.0, -5.0 / 6.0, 0.5, 0.0, 0.0],
                vec![0.25, 1.75, 0.75, -1.75, 0.0],
            ],
            b_ex: vec![0.25, 1.75, 0.75, -1.75, 0.0],
        },
        // Explicit stage times are the explicit row sums; the scheme is
        // written for an autonomous N, so they only matter under forcing.
        SchemeId::SspImexRk2 => ButcherPair {
            c: vec![0.0, 0.0, 0.5, 1.0],
            a_im: vec![
                vec![0.0; 4],
                vec![0.0, 0.25, 0.0, 0.0],
                vec![0.0, 0.0, 0.25, 0.0],
                vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            ],
            b_im: vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            a_ex: vec![vec![0.0; 4], vec![0.0; 4], vec![0.0, 0.5, 0.0, 0.0], vec![0.0, 0.5, 0.5, 0.0]],
            b_ex: vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        },
        other => return Err(StepError::NotImex(other)),
    };
    tab.validate()?;
    Ok(tab)
}

/// The implicit operator `L m = beta lap_h m` and its shifted solves,
/// with one cached Helmholtz plan per distinct shift.
#[derive(Debug, Clone)]
pub struct DiffusionSolver {
    grid: GridSpec,
    beta: f64,
    plans: Vec<HelmholtzPlan>,
}

impl DiffusionSolver {
    const MAX_PLANS: usize = 8;

    pub fn new(grid: GridSpec, beta: f64) -> Self {
        Self { grid, beta, plans: Vec::new() }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn apply(&self, m: &VectorField3) -> VectorField3 {
        let mut out = grid::laplacian(m);
        out.scale(self.beta);
        out.fill_ghosts();
        out
    }

    /// Solves `(I - coef * beta * lap_h) x = rhs`.
    pub fn solve(&mut self, coef: f64, rhs: &VectorField3) -> Result<VectorField3, StepError> {
        let lambda = coef * self.beta;
        if lambda == 0.0 {
            let mut x = rhs.clone();
            x.fill_ghosts();
            return Ok(x);
        }
        if let Some(p) = self.plans.iter().find(|p| p.lambda() == lambda) {
            return Ok(p.solve(rhs)?);
        }
        if self.plans.len() == Self::MAX_PLANS {
            self.plans.remove(0);
        }
        let plan = HelmholtzPlan::new(self.grid, lambda)?;
        let x = plan.solve(rhs)?;
        self.plans.push(plan);
        Ok(x)
    }

    pub fn cached_plans(&self) -> usize {
        self.plans.len()
    }
}

/// Explicit part `N(t, m)`.
pub type ExplicitFn<'a> = dyn FnMut(f64, &VectorField3) -> Result<VectorField3, StepError> + 'a;

/// One IMEX Runge-Kutta step from `(t, m)` with step `k`.
pub fn imex_step(
    tab: &ButcherPair,
    m: &VectorField3,
    t: f64,
    k: f64,
    diffusion: &mut DiffusionSolver,
    explicit: &mut ExplicitFn<'_>,
) -> Result<VectorField3, StepError> {
    imex_step_stages(tab, m, t, k, diffusion, explicit).map(|(next, _)| next)
}

/// As [`imex_step`], also returning the stage values.
pub fn imex_step_stages(
    tab: &ButcherPair,
    m: &VectorField3,
    t: f64,
    k: f64,
    diffusion: &mut DiffusionSolver,
    explicit: &mut ExplicitFn<'_>,
) -> Result<(VectorField3, Vec<VectorField3>), StepError> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(StepError::BadStep(k));
    }
    let s = tab.stages();
    if k == 0.0 {
        return Ok((m.clone(), vec![m.clone(); s]));
    }
    let stiffly = tab.is_stiffly_accurate();
    let used = |a: &Vec<Vec<f64>>, b: &Vec<f64>, j: usize| -> bool {
        (j + 1..s).any(|i| a[i][j] != 0.0) || (!stiffly && b[j] != 0.0)
    };
    let mut stages: Vec<VectorField3> = Vec::with_capacity(s);
    let mut l_terms: Vec<Option<VectorField3>> = Vec::with_capacity(s);
    let mut n_terms: Vec<Option<VectorField3>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut rhs = m.clone();
        for j in 0..i {
            if tab.a_im[i][j] != 0.0 {
                rhs.axpy(k * tab.a_im[i][j], l_terms[j].as_ref().expect("implicit term cached"));
            }
            if tab.a_ex[i][j] != 0.0 {
                rhs.axpy(k * tab.a_ex[i][j], n_terms[j].as_ref().expect("explicit term cached"));
            }
        }
        let stage = diffusion.solve(k * tab.a_im[i][i], &rhs)?;
        l_terms.push(if used(&tab.a_im, &tab.b_im, i) { Some(diffusion.apply(&stage)) } else { None });
        n_terms.push(if used(&tab.a_ex, &tab.b_ex, i) { Some(explicit(t + tab.c[i] * k, &stage)?) } else { None });
        stages.push(stage);
    }
    let next = if stiffly {
        stages[s - 1].clone()
    } else {
        let mut out = m.clone();
        for j in 0..s {
            if tab.b_im[j] != 0.0 {
                out.axpy(k * tab.b_im[j], l_terms[j].as_ref().expect("implicit term cached"));
            }
            if tab.b_ex[j] != 0.0 {
                out.axpy(k * tab.b_ex[j], n_terms[j].as_ref().expect("explicit term cached"));
            }
        }
        out.fill_ghosts();
        out
    };
    Ok((next, stages))
}

/// Pointwise normalization `m / |m|`.
pub fn project(m: &VectorField3) -> Result<VectorField3, StepError> {
    let g = *m.grid();
    let mut out = m.clone();
    let [nx, ny, nz] = g.n();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = g.cell(i, j, k);
                let v = m.get(c);
                let norm = dot(v, v).sqrt();
                if !(norm >= MIN_PROJECT_LENGTH) {
                    return Err(StepError::ZeroLength { cell: [i, j, k], norm });
                }
                out.set(c, [v[0] / norm, v[1] / norm, v[2] / norm]);
            }
        }
    }
    out.fill_ghosts();
    Ok(out)
}

/// Multistep history for the BDF2 variants.
#[derive(Debug, Clone)]
pub struct StepState {
    pub m_curr: VectorField3,
    pub m_prev: Option<VectorField3>,
    pub f_curr: Option<VectorField3>,
    pub f_prev: Option<VectorField3>,
    pub t: f64,
    pub k: f64,
    pub steps: usize,
}

impl StepState {
    pub fn new(m0: VectorField3, t0: f64, k: f64) -> Self {
        Self { m_curr: m0, m_prev: None, f_curr: None, f_prev: None, t: t0, k, steps: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepConfig {
    pub scheme: SchemeId,
    pub k: f64,
    /// Normalize after each IMEX step (the BDF2 variants always project).
    pub project: bool,
    pub gmres: GmresConfig,
    /// Left-precondition the BDF2 system with a Helmholtz solve.
    pub precondition: bool,
}

impl StepConfig {
    pub fn new(scheme: SchemeId, k: f64) -> Self {
        Self { scheme, k, project: false, gmres: GmresConfig::default(), precondition: false }
    }

    pub fn projected(mut self, on: bool) -> Self {
        self.project = on;
        self
    }
}

/// Owns the model, the history and the solver caches of one run.
#[derive(Debug)]
pub struct Stepper {
    cfg: StepConfig,
    model: LlModel,
    tableau: Option<ButcherPair>,
    startup_tableau: ButcherPair,
    diffusion: DiffusionSolver,
    ld_plan: Option<HelmholtzPlan>,
    state: StepState,
    t_start: f64,
    gmres_iters: usize,
}

impl Stepper {
    pub fn new(model: LlModel, cfg: StepConfig, m0: VectorField3, t0: f64) -> Result<Self, StepError> {
        if !(cfg.k > 0.0 && cfg.k.is_finite()) {
            return Err(StepError::BadStep(cfg.k));
        }
        if !m0.grid().same_shape(model.grid()) {
            return Err(PhysicsError::GridMismatch.into());
        }
        let tableau = if cfg.scheme.is_imex() { Some(builtin_tableau(cfg.scheme)?) } else { None };
        let diffusion = DiffusionSolver::new(*model.grid(), model.params.beta);
        let mut m0 = m0;
        m0.fill_ghosts();
        let state = StepState::new(m0, t0, cfg.k);
        Ok(Self {
            startup_tableau: builtin_tableau(SchemeId::ImexRk2)?,
            cfg,
            model,
            tableau,
            diffusion,
            ld_plan: None,
            state,
            t_start: t0,
            gmres_iters: 0,
        })
    }

    pub fn state(&self) -> &StepState {
        &self.state
    }

    pub fn m(&self) -> &VectorField3 {
        &self.state.m_curr
    }

    pub fn t(&self) -> f64 {
        self.state.t
    }

    pub fn model(&self) -> &LlModel {
        &self.model
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    /// Total GMRES iterations spent so far (BDF2 only).
    pub fn gmres_iterations(&self) -> usize {
        self.gmres_iters
    }

    fn imex_with(&mut self, tab: &ButcherPair) -> Result<VectorField3, StepError> {
        let model = &self.model;
        let mut explicit = |t: f64, m: &VectorField3| -> Result<VectorField3, StepError> { Ok(model.explicit_part(t, m)?) };
        imex_step(tab, &self.state.m_curr, self.state.t, self.cfg.k, &mut self.diffusion, &mut explicit)
    }

    /// Advances one step of size `k`.
    pub fn step(&mut self) -> Result<(), StepError> {
        let k = self.cfg.k;
        let next = if let Some(tab) = self.tableau.clone() {
            let next = self.imex_with(&tab)?;
            if self.cfg.project {
                project(&next)?
            } else {
                next
            }
        } else if self.state.m_prev.is_none() {
            self.startup()?
        } else {
            match self.cfg.scheme {
                SchemeId::Bdf2 => self.bdf2_step()?,
                _ => self.bdf2_ld_step()?,
            }
        };
        if !next.all_finite() {
            return Err(StepError::NonFinite { t: self.state.t + k });
        }
        if self.cfg.scheme.is_multistep() {
            let f_next = self.model.assemble_f(&next)?;
            let s = &mut self.state;
            s.m_prev = Some(std::mem::replace(&mut s.m_curr, next));
            s.f_prev = s.f_curr.replace(f_next);
        } else {
            self.state.m_curr = next;
        }
        self.state.steps += 1;
        self.state.t = self.t_start + self.state.steps as f64 * k;
        Ok(())
    }

    /// First level of a BDF2 run: one IMEX-RK2 step of the same size,
    /// projected.
    fn startup(&mut self) -> Result<VectorField3, StepError> {
        let f0 = self.model.assemble_f(&self.state.m_curr)?;
        self.state.f_curr = Some(f0);
        let tab = self.startup_tableau.clone();
        let next = self.imex_with(&tab)?;
        project(&next)
    }

    fn extrapolated(&self) -> (VectorField3, VectorField3) {
        let s = &self.state;
        let prev = s.m_prev.as_ref().expect("history present");
        let mut m_hat = s.m_curr.clone();
        m_hat.scale(2.0);
        m_hat.axpy(-1.0, prev);
        m_hat.fill_ghosts();
        let mut f_hat = s.f_curr.clone().expect("field cached");
        f_hat.scale(2.0);
        f_hat.axpy(-1.0, s.f_prev.as_ref().expect("field cached"));
        f_hat.fill_ghosts();
        (m_hat, f_hat)
    }

    fn history_rhs(&self) -> VectorField3 {
        let s = &self.state;
        let mut rhs = s.m_curr.clone();
        rhs.scale(2.0);
        rhs.axpy(-0.5, s.m_prev.as_ref().expect("history present"));
        rhs
    }

    fn forcing_at(&self, t: f64) -> Option<VectorField3> {
        self.model.terms.forcing.as_ref().map(|g| g.sample(self.model.grid(), t))
    }

    /// Semi-implicit BDF2 with extrapolated prefactors, solved by GMRES.
    fn bdf2_step(&mut self) -> Result<VectorField3, StepError> {
        let k = self.cfg.k;
        let t_next = self.state.t + k;
        let (m_hat, f_hat) = self.extrapolated();
        let grid = *m_hat.grid();
        let alpha = self.model.params.alpha;
        let eps = if self.model.terms.exchange { self.model.params.eps } else { 0.0 };

        let mut rhs = self.history_rhs();
        for c in grid.interior() {
            let (mh, fh) = (m_hat.get(c), f_hat.get(c));
            let p = cross(mh, fh);
            let d = cross(mh, p);
            let mut v = rhs.get(c);
            for q in 0..3 {
                v[q] -= k * (p[q] + alpha * d[q]);
            }
            rhs.set(c, v);
        }
        if let Some(g) = self.forcing_at(t_next) {
            rhs.axpy(k, &g);
        }
        rhs.fill_ghosts();

        let mut lap = VectorField3::zeros(grid);
        let apply = |x: &VectorField3, out: &mut VectorField3| {
            let mut xg = x.clone();
            xg.fill_ghosts();
            grid::laplacian_into(&xg, &mut lap);
            for c in grid.interior() {
                let mh = m_hat.get(c);
                let l = lap.get(c);
                let h = [eps * l[0], eps * l[1], eps * l[2]];
                let p = cross(mh, h);
                let d = cross(mh, p);
                let xv = x.get(c);
                out.set(c, [
                    1.5 * xv[0] + k * (p[0] + alpha * d[0]),
                    1.5 * xv[1] + k * (p[1] + alpha * d[1]),
                    1.5 * xv[2] + k * (p[2] + alpha * d[2]),
                ]);
            }
        };
        let (x, outcome) = if self.cfg.precondition {
            let plan = HelmholtzPlan::new(grid, 2.0 / 3.0 * k * alpha * eps)?;
            let mut pc = |r: &VectorField3, z: &mut VectorField3| {
                let mut sol = plan.solve(r).expect("plan matches grid");
                sol.scale(2.0 / 3.0);
                *z = sol;
            };
            gmres_solve_preconditioned(apply, Some(&mut pc), &rhs, Some(&m_hat), &self.cfg.gmres)
        } else {
            gmres_solve_preconditioned(apply, None, &rhs, Some(&m_hat), &self.cfg.gmres)
        };
        self.gmres_iters += outcome.iters;
        if !outcome.converged {
            return Err(StepError::Gmres {
                iters: outcome.iters,
                rel_residual: outcome.rel_residual,
                diagnostic: outcome.diagnostic,
            });
        }
        project(&x)
    }

    /// Large-damping BDF2: only `alpha eps lap m` is implicit.
    fn bdf2_ld_step(&mut self) -> Result<VectorField3, StepError> {
        let k = self.cfg.k;
        let t_next = self.state.t + k;
        let (m_hat, f_hat) = self.extrapolated();
        let grid = *m_hat.grid();
        let alpha = self.model.params.alpha;
        let eps = if self.model.terms.exchange { self.model.params.eps } else { 0.0 };
        let lap_hat = grid::laplacian(&m_hat);
        let grad_sq = grid::gradient(&m_hat).squared_magnitudes();

        let mut rhs = self.history_rhs();
        for (idx, c) in grid.interior().enumerate() {
            let (mh, fh, lh) = (m_hat.get(c), f_hat.get(c), lap_hat.get(c));
            let h = [eps * lh[0] + fh[0], eps * lh[1] + fh[1], eps * lh[2] + fh[2]];
            let p = cross(mh, h);
            let s = alpha * (eps * grad_sq[idx] - dot(mh, fh));
            let mut v = rhs.get(c);
            for q in 0..3 {
                v[q] += k * (-p[q] + alpha * fh[q] + s * mh[q]);
            }
            rhs.set(c, v);
        }
        if let Some(g) = self.forcing_at(t_next) {
            rhs.axpy(k, &g);
        }
        rhs.scale(2.0 / 3.0);
        rhs.fill_ghosts();
        let lambda = 2.0 / 3.0 * alpha * eps * k;
        if self.ld_plan.as_ref().map(|p| p.lambda()) != Some(lambda) {
            self.ld_plan = Some(HelmholtzPlan::new(grid, lambda)?);
        }
        let x = self.ld_plan.as_ref().expect("plan built").solve(&rhs)?;
        project(&x)
    }

    /// Takes `round((t_final - t) / k)` steps.
    pub fn advance_to(&mut self, t_final: f64) -> Result<usize, StepError> {
        let n = ((t_final - self.state.t) / self.cfg.k).round().max(0.0) as usize;
        for _ in 0..n {
            self.step()?;
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{FieldTerms, MaterialParams, RhsForm};

    fn unit(v: [f64; 3]) -> [f64; 3] {
        let n = dot(v, v).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    }

    #[test]
    fn builtin_weights_sum_to_one() {
        for id in [SchemeId::ImexRk2, SchemeId::ImexRk3, SchemeId::SspImexRk2] {
            let t = builtin_tableau(id).unwrap();
            let (bi, be): (f64, f64) = (t.b_im.iter().sum(), t.b_ex.iter().sum());
            assert!((bi - 1.0).abs() < 1e-15 && (be - 1.0).abs() < 1e-15, "{id}");
        }
    }

    #[test]
    fn second_order_conditions() {
        for id in [SchemeId::ImexRk2, SchemeId::ImexRk3, SchemeId::SspImexRk2] {
            let t = builtin_tableau(id).unwrap();
            let s = t.stages();
            let c_im: Vec<f64> = t.a_im.iter().map(|r| r.iter().sum()).collect();
            let c_ex: Vec<f64> = t.a_ex.iter().map(|r| r.iter().sum()).collect();
            for (b, c) in [(&t.b_im, &c_im), (&t.b_ex, &c_ex), (&t.b_im, &c_ex), (&t.b_ex, &c_im)] {
                let v: f64 = (0..s).map(|j| b[j] * c[j]).sum();
                assert!((v - 0.5).abs() < 1e-14, "{id}: {v}");
            }
            for j in 0..s {
                if t.b_ex[j] != 0.0 || (j + 1..s).any(|i| t.a_ex[i][j] != 0.0) {
                    assert!((t.c[j] - c_ex[j]).abs() < 1e-15, "{id} stage {j}");
                }
            }
        }
    }

    #[test]
    fn bdf_has_no_tableau() {
        assert_eq!(builtin_tableau(SchemeId::Bdf2), Err(StepError::NotImex(SchemeId::Bdf2)));
    }

    #[test]
    fn upper_explicit_entry_rejected() {
        let r = ButcherPair::new(vec![0.0], vec![vec![0.0]], vec![1.0], vec![vec![1.0]], vec![1.0]);
        assert!(matches!(r, Err(StepError::BadTableau(_))));
    }

    #[test]
    fn scheme_names_round_trip() {
        for id in SchemeId::ALL {
            assert_eq!(id.name().parse::<SchemeId>().unwrap(), id);
        }
        assert_eq!("IMEX-RK3".parse::<SchemeId>().unwrap(), SchemeId::ImexRk3);
        assert!("rk4".parse::<SchemeId>().is_err());
    }

    #[test]
    fn projection_arithmetic() {
        let g = GridSpec::unit_1d(3).unwrap();
        let m = VectorField3::uniform(g, [3.0, 4.0, 0.0]);
        let p = project(&m).unwrap();
        for c in g.interior() {
            let v = p.get(c);
            assert!((v[0] - 0.6).abs() < 1e-16 && (v[1] - 0.8).abs() < 1e-16 && v[2] == 0.0);
        }
        let mut z = VectorField3::uniform(g, [1.0, 0.0, 0.0]);
        z.set(g.cell(1, 0, 0), [0.0, 1e-9, 0.0]);
        assert!(matches!(project(&z), Err(StepError::ZeroLength { cell: [1, 0, 0], .. })));
    }

    #[test]
    fn zero_step_is_identity() {
        let g = GridSpec::unit_1d(8).unwrap();
        let m = VectorField3::from_fn(g, |x| unit([x[0].sin(), 1.0, -0.5 * x[0]]));
        let mut d = DiffusionSolver::new(g, 5.0);
        let mut n = |_t: f64, f: &VectorField3| -> Result<VectorField3, StepError> { Ok(grid::laplacian(f)) };
        for id in [SchemeId::ImexRk2, SchemeId::ImexRk3, SchemeId::SspImexRk2] {
            let out = imex_step(&builtin_tableau(id).unwrap(), &m, 0.3, 0.0, &mut d, &mut n).unwrap();
            assert_eq!(out.data(), m.data());
        }
    }

    #[test]
    fn plans_cached_per_shift() {
        let g = GridSpec::unit_1d(8).unwrap();
        let m = VectorField3::from_fn(g, |x| [x[0], 0.0, 1.0]);
        let mut d = DiffusionSolver::new(g, 2.0);
        let mut n = |_t: f64, f: &VectorField3| -> Result<VectorField3, StepError> { Ok(VectorField3::zeros(*f.grid())) };
        let tab = builtin_tableau(SchemeId::SspImexRk2).unwrap();
        for _ in 0..3 {
            imex_step(&tab, &m, 0.0, 0.01, &mut d, &mut n).unwrap();
        }
        assert_eq!(d.cached_plans(), 2);
    }

    #[test]
    fn stationary_uniform_state_is_fixed() {
        let g = GridSpec::unit_1d(6).unwrap();
        let m0 = VectorField3::uniform(g, unit([1.0, 2.0, -1.0]));
        for scheme in SchemeId::ALL {
            let model = LlModel::new(g, MaterialParams::dimensionless(1.0, 0.0, 0.5, 3.0), FieldTerms::default(), RhsForm::CrossProduct).unwrap();
            let mut st = Stepper::new(model, StepConfig::new(scheme, 0.05).projected(true), m0.clone(), 0.0).unwrap();
            st.advance_to(0.5).unwrap();
            for c in g.interior() {
                let (a, b) = (st.m().get(c), m0.get(c));
                for q in 0..3 {
                    assert!((a[q] - b[q]).abs() < 1e-15, "{scheme}");
                }
            }
        }
    }

    #[test]
    fn bdf2_history_after_startup() {
        let g = GridSpec::unit_1d(6).unwrap();
        let m0 = VectorField3::from_fn(g, |x| unit([x[0], 1.0, 0.3]));
        let model = LlModel::new(g, MaterialParams::dimensionless(1.0, 0.0, 0.5, 3.0), FieldTerms::default(), RhsForm::CrossProduct).unwrap();
        let mut st = Stepper::new(model, StepConfig::new(SchemeId::Bdf2, 0.01), m0.clone(), 0.0).unwrap();
        st.step().unwrap();
        assert_eq!(st.state().m_prev.as_ref().unwrap().data(), m0.data());
        assert!((st.t() - 0.01).abs() < 1e-17);
        st.step().unwrap();
        assert!(st.gmres_iterations() > 0);
    }
}
