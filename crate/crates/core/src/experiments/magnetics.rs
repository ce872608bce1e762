//! Thin-film simulations with physical Permalloy parameters: relaxation to
//! equilibrium and quasi-static hysteresis loops.

use crate::grid::{GridSpec, VectorField3};
use crate::physics::{normalize, DemagTensor, EnergyBreakdown, FieldTerms, LlModel, MaterialParams, PhysicalConstants, RhsForm};
use crate::steppers::{SchemeId, StepConfig, Stepper};

use super::ExperimentError;

/// Rectangular film in physical units, discretized on a reduced grid whose
/// length unit is the largest extent.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmSetup {
    pub grid: GridSpec,
    pub phys: PhysicalConstants,
    pub params: MaterialParams,
}

impl FilmSetup {
    /// `extent` in meters. `beta_per_eps` is the artificial damping in units
    /// of the reduced exchange coefficient, so the implicit diffusion is
    /// `beta_per_eps * eps * lap`.
    pub fn new(n: [usize; 3], extent: [f64; 3], alpha: f64, beta_per_eps: f64) -> Result<Self, ExperimentError> {
        let length = extent.iter().cloned().fold(0.0, f64::max);
        let grid = GridSpec::new_3d(n, extent.map(|e| e / length))?;
        let phys = PhysicalConstants::permalloy(length);
        let params = MaterialParams::from_physical(phys, alpha, beta_per_eps * phys.eps());
        params.validate()?;
        Ok(Self { grid, phys, params })
    }

    /// 1 x 2 x 0.02 um element on 32 x 64 x 1 cells.
    pub fn equilibrium_desk() -> Self {
        Self::new([32, 64, 1], [1e-6, 2e-6, 2e-8], 0.1, 3.0).expect("valid film")
    }

    /// 1 x 2 x 0.02 um element on 64 x 128 x 1 cells.
    pub fn equilibrium_full() -> Self {
        Self::new([64, 128, 1], [1e-6, 2e-6, 2e-8], 0.1, 3.0).expect("valid film")
    }

    /// 25 x 50 x 1 cells of 40 nm (20 nm thick).
    pub fn hysteresis_desk() -> Self {
        Self::new([25, 50, 1], [1e-6, 2e-6, 2e-8], 0.1, 3.0).expect("valid film")
    }

    /// 50 x 100 x 1 cells of 20 nm.
    pub fn hysteresis_paper() -> Self {
        Self::new([50, 100, 1], [1e-6, 2e-6, 2e-8], 0.1, 3.0).expect("valid film")
    }

    /// Reduced step for a step given in picoseconds.
    pub fn step_from_ps(&self, ps: f64) -> f64 {
        ps * 1e-12 / self.phys.time_unit()
    }

    pub fn model(&self, h_ext: [f64; 3], demag: Option<DemagTensor>) -> Result<LlModel, ExperimentError> {
        let terms = FieldTerms::micromagnetic(h_ext);
        Ok(match demag {
            Some(d) => LlModel::with_demag(self.grid, self.params, terms, RhsForm::CrossProduct, d)?,
            None => LlModel::new(self.grid, self.params, terms, RhsForm::CrossProduct)?,
        })
    }
}

/// Starting configurations for relaxation. The long axis is `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initializer {
    /// Four flux-closure domains around a soft out-of-plane core.
    Landau,
    /// Magnetization along `y` with both ends tilted the same way.
    CState,
    /// Magnetization along `y` with the ends tilted in opposite senses.
    SState,
    Uniform([f64; 3]),
}

impl Initializer {
    pub fn name(&self) -> &'static str {
        match self {
            Initializer::Landau => "landau",
            Initializer::CState => "c_state",
            Initializer::SState => "s_state",
            Initializer::Uniform(_) => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "landau" => Some(Initializer::Landau),
            "c_state" | "c" => Some(Initializer::CState),
            "s_state" | "s" => Some(Initializer::SState),
            "uniform" => Some(Initializer::Uniform([0.0, 1.0, 0.0])),
            _ => None,
        }
    }
}

const END_TILT: f64 = std::f64::consts::FRAC_PI_3;

pub fn initial_field(grid: GridSpec, init: Initializer) -> VectorField3 {
    let ext = grid.extent();
    let core = 2.0 * grid.h()[0].max(grid.h()[1]);
    VectorField3::from_fn(grid, |x| {
        let v = 2.0 * x[1] / ext[1] - 1.0;
        match init {
            Initializer::Uniform(d) => normalize(d),
            Initializer::SState => {
                let th = END_TILT * v;
                [th.sin(), th.cos(), 0.0]
            }
            Initializer::CState => {
                let th = END_TILT * v.abs();
                [th.sin(), th.cos(), 0.0]
            }
            Initializer::Landau => {
                let (dx, dy) = (x[0] - 0.5 * ext[0], x[1] - 0.5 * ext[1]);
                let mz = (-(dx * dx + dy * dy) / (core * core)).exp();
                // closure domains at the short edges, bounded by 45 degree walls
                let end = dy.abs() > 0.5 * (ext[1] - ext[0]).abs() + dx.abs();
                let inplane = if end { [-dy.signum(), 0.0] } else { [0.0, dx.signum()] };
                normalize([inplane[0] * (1.0 - mz), inplane[1] * (1.0 - mz), mz.max(1e-3)])
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxConfig {
    pub scheme: SchemeId,
    /// Reduced step size.
    pub k: f64,
    pub max_steps: usize,
    /// Stop when the relative energy change over one step falls below this.
    pub steady_tol: f64,
    pub record_every: usize,
    pub project: bool,
}

impl RelaxConfig {
    pub fn new(k: f64) -> Self {
        Self { scheme: SchemeId::ImexRk2, k, max_steps: 20_000, steady_tol: 1e-9, record_every: 10, project: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxResult {
    pub m: VectorField3,
    pub trace: Vec<EnergyRecord>,
    pub steps: usize,
    pub converged: bool,
    pub energy: EnergyBreakdown,
}

/// Relative change `|e1 - e0| / |e0|`, absolute below `|e0| < 1e-12`.
pub fn steady(e0: f64, e1: f64, tol: f64) -> bool {
    if e0.abs() < 1e-12 {
        (e1 - e0).abs() < 1e-15
    } else {
        ((e1 - e0) / e0).abs() < tol
    }
}

pub fn relax(model: LlModel, m0: VectorField3, cfg: &RelaxConfig) -> Result<RelaxResult, ExperimentError> {
    if cfg.record_every == 0 || !(cfg.steady_tol > 0.0) {
        return Err(ExperimentError::Invalid("record_every and steady_tol must be positive".into()));
    }
    let m0 = if cfg.project { crate::steppers::project(&m0)? } else { m0 };
    let mut energy = model.energy(&m0)?;
    let mut stepper = Stepper::new(model, StepConfig::new(cfg.scheme, cfg.k).projected(cfg.project), m0, 0.0)?;
    let mut trace = vec![EnergyRecord { step: 0, t: 0.0, energy }];
    let mut converged = false;
    let mut steps = 0;
    while steps < cfg.max_steps {
        stepper.step()?;
        steps += 1;
        let next = stepper.model().energy(stepper.m())?;
        let done = steady(energy.total, next.total, cfg.steady_tol);
        energy = next;
        if steps % cfg.record_every == 0 || done {
            trace.push(EnergyRecord { step: steps, t: stepper.t(), energy });
        }
        if done {
            converged = true;
            break;
        }
    }
    if trace.last().map(|r| r.step) != Some(steps) {
        trace.push(EnergyRecord { step: steps, t: stepper.t(), energy });
    }
    Ok(RelaxResult { m: stepper.m().clone(), trace, steps, converged, energy })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopAxis {
    X,
    Y,
}

impl LoopAxis {
    pub fn index(self) -> usize {
        match self {
            LoopAxis::X => 0,
            LoopAxis::Y => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub axis: LoopAxis,
    /// In-plane tilt of the applied field away from the loop axis.
    pub canting_deg: f64,
    pub h_max_mt: f64,
    /// Field steps per sweep.
    pub n_steps: usize,
    pub steady_tol: f64,
    pub max_steps_per_field: usize,
    pub relax: RelaxConfig,
}

impl LoopConfig {
    pub fn new(axis: LoopAxis, n_steps: usize, k: f64) -> Self {
        let mut relax = RelaxConfig::new(k);
        relax.record_every = usize::MAX;
        Self { axis, canting_deg: 1.0, h_max_mt: 50.0, n_steps, steady_tol: 1e-9, max_steps_per_field: 4000, relax }
    }

    pub fn direction(&self) -> [f64; 3] {
        let (s, c) = self.canting_deg.to_radians().sin_cos();
        match self.axis {
            LoopAxis::X => [c, s, 0.0],
            LoopAxis::Y => [s, c, 0.0],
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_steps < 2 {
            return Err(ExperimentError::Invalid("n_steps must be at least 2".into()));
        }
        if !(self.steady_tol > 0.0) {
            return Err(ExperimentError::Invalid("steady_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSample {
    pub h_mt: f64,
    pub mean: [f64; 3],
    pub steps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopResult {
    pub axis: LoopAxis,
    /// `+H_max` down to `-H_max`.
    pub descending: Vec<LoopSample>,
    /// `-H_max` up to `+H_max`.
    pub ascending: Vec<LoopSample>,
    /// Mean magnetization at zero field on each branch.
    pub remanence: [Option<[f64; 3]>; 2],
    /// Coercive field per branch, mT.
    pub coercivity_mt: [Option<f64>; 2],
}

impl LoopResult {
    /// Field values at which relaxation hit the step cap.
    pub fn unconverged(&self) -> Vec<f64> {
        self.descending.iter().chain(&self.ascending).filter(|s| !s.converged).map(|s| s.h_mt).collect()
    }

    pub fn mean_coercivity(&self) -> Option<f64> {
        match self.coercivity_mt {
            [Some(a), Some(b)] => Some(0.5 * (a + b)),
            [Some(a), None] | [None, Some(a)] => Some(a),
            _ => None,
        }
    }
}

/// Zero crossing of the loop-axis component, linearly interpolated.
pub fn coercive_field(branch: &[LoopSample], axis: LoopAxis) -> Option<f64> {
    let a = axis.index();
    branch.windows(2).find_map(|w| {
        let (m0, m1) = (w[0].mean[a], w[1].mean[a]);
        if m0 == 0.0 {
            return Some(w[0].h_mt.abs());
        }
        if m0 * m1 < 0.0 {
            let s = m0 / (m0 - m1);
            Some((w[0].h_mt + s * (w[1].h_mt - w[0].h_mt)).abs())
        } else {
            None
        }
    })
}

/// Mean magnetization at `H = 0`, linearly interpolated between samples.
pub fn remanence(branch: &[LoopSample]) -> Option<[f64; 3]> {
    branch.windows(2).find_map(|w| {
        let (h0, h1) = (w[0].h_mt, w[1].h_mt);
        if h0 == 0.0 {
            return Some(w[0].mean);
        }
        if h1 == 0.0 {
            return Some(w[1].mean);
        }
        if h0 * h1 < 0.0 {
            let s = h0 / (h0 - h1);
            Some([0, 1, 2].map(|q| w[0].mean[q] + s * (w[1].mean[q] - w[0].mean[q])))
        } else {
            None
        }
    })
}

/// Quasi-static loop: descend from `+H_max` to `-H_max`, then ascend back,
/// relaxing to a steady state at every field value.
pub fn hysteresis(setup: &FilmSetup, cfg: &LoopConfig) -> Result<LoopResult, ExperimentError> {
    cfg.validate()?;
    let demag = DemagTensor::build(&setup.grid)?;
    let dir = cfg.direction();
    let fields: Vec<f64> = (0..=cfg.n_steps).map(|i| cfg.h_max_mt * (1.0 - 2.0 * i as f64 / cfg.n_steps as f64)).collect();
    let mut relax_cfg = cfg.relax.clone();
    relax_cfg.steady_tol = cfg.steady_tol;
    relax_cfg.max_steps = cfg.max_steps_per_field;
    relax_cfg.record_every = usize::MAX;

    let mut m = VectorField3::uniform(setup.grid, dir);
    let run_branch = |values: &mut dyn Iterator<Item = f64>, m: &mut VectorField3| -> Result<Vec<LoopSample>, ExperimentError> {
        let mut out = Vec::new();
        for h_mt in values {
            let h = setup.phys.reduced_field_from_mt(h_mt);
            let model = setup.model(dir.map(|d| d * h), Some(demag.clone()))?;
            let r = relax(model, m.clone(), &relax_cfg)?;
            *m = r.m;
            out.push(LoopSample { h_mt, mean: m.mean(), steps: r.steps, converged: r.converged });
        }
        Ok(out)
    };
    let descending = run_branch(&mut fields.iter().copied(), &mut m)?;
    let mut ascending = vec![*descending.last().expect("at least two fields")];
    ascending.extend(run_branch(&mut fields.iter().rev().skip(1).copied(), &mut m)?);
    Ok(LoopResult {
        axis: cfg.axis,
        remanence: [remanence(&descending), remanence(&ascending)],
        coercivity_mt: [coercive_field(&descending, cfg.axis), coercive_field(&ascending, cfg.axis)],
        descending,
        ascending,
    })
}
