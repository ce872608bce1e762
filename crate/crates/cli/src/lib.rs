//! Command-line driver. Each subcommand resolves a [`RunConfig`] from an
//! optional config file, a built-in preset and command-line flags (in that
//! order of increasing precedence), runs one experiment and writes its
//! tables to a directory named after the resolved configuration.
//!
//! Exit status: 0 on success, 1 for usage or validation errors, 2 when the
//! computation itself fails.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use llimex::experiments::{
    beta_sweep, convergence_study, efficiency_bench, hysteresis, initial_field, relax, stability_probe, time_to_error,
    ConvergenceSpec, ExperimentError, FilmSetup, LoopConfig, Refinement, RelaxConfig, StabilityCheck, StabilityConfig,
};
use llimex::io::config::{GridSection, MaterialSection};
use llimex::io::{fmt_f64, parse_unresolved, ConfigError, CsvTable, ExperimentKind, FieldSnapshot, RunConfig, RunDir, SnapshotError};
use llimex::physics::{DemagTensor, LlModel, PhysicalConstants, RhsForm};
use llimex::steppers::{builtin_tableau, SchemeId};

#[derive(Debug, Parser)]
#[command(name = "llimex", version, about = "Landau-Lifshitz solver with IMEX time stepping")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args, Default)]
struct Common {
    /// TOML run configuration; replaces the built-in preset.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Root directory for run outputs.
    #[arg(short, long)]
    out: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Cells per axis.
    #[arg(long)]
    cells: Option<usize>,
    /// Time step (reduced units).
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Artificial damping, in units of the exchange coefficient.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Renormalize after every step.
    #[arg(long)]
    project: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Convergence study against the manufactured solution.
    Converge {
        #[command(flatten)]
        common: Common,
        /// temporal, spatial or coupled.
        #[arg(long)]
        refinement: Option<String>,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        cells_list: Option<Vec<usize>>,
        /// `c` in `k = c h^(2/3)` for coupled refinement.
        #[arg(long)]
        coupling: Option<f64>,
    },
    /// Errors at one (k, h) across artificial damping and damping values.
    BetaSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Energy inequalities of the SSP scheme on random data.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        k_over_h2: Option<Vec<f64>>,
        #[arg(long)]
        n_steps: Option<usize>,
    },
    /// Relax a Permalloy film to equilibrium.
    Relax {
        #[command(flatten)]
        common: Common,
        /// landau, c_state, s_state or uniform.
        #[arg(long)]
        initializer: Option<String>,
        #[arg(long)]
        max_steps: Option<usize>,
        /// 64 x 128 x 1 cells instead of 32 x 64 x 1.
        #[arg(long)]
        full: bool,
    },
    /// Quasi-static hysteresis loop of a Permalloy film.
    Hysteresis {
        #[command(flatten)]
        common: Common,
        /// x or y.
        #[arg(long)]
        axis: Option<String>,
        #[arg(long)]
        field_steps: Option<usize>,
        /// 50 x 100 x 1 cells of 20 nm. Runs for hours.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Error against wall time for several schemes.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<f64>>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Error level for the time-to-error summary.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Print the coefficient arrays of a Runge-Kutta pair.
    DumpTableau {
        #[arg(long)]
        scheme: String,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Experiment(ExperimentError),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Experiment(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) | CliError::Io(s) => f.write_str(s),
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Experiment(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Experiment(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SnapshotError> for CliError {
    fn from(e: SnapshotError) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Runs the command line `argv` (program name first) and returns the exit
/// status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(common: &Common) -> Result<(RunConfig, bool), CliError> {
    match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok((parse_unresolved(&text)?, true))
        }
        None => Ok((RunConfig::default(), false)),
    }
}

fn apply_common(cfg: &mut RunConfig, c: &Common) {
    if let Some(v) = &c.out {
        cfg.output.dir = v.clone();
    }
    if let Some(v) = &c.scheme {
        cfg.scheme.id = v.clone();
    }
    if let Some(v) = c.dim {
        cfg.grid.dim = v;
    }
    if let Some(v) = c.cells {
        cfg.grid.cells = vec![v];
    }
    if let Some(v) = c.k {
        cfg.scheme.k = v;
    }
    if let Some(v) = c.t_final {
        cfg.scheme.t_final = v;
    }
    if let Some(v) = c.alpha {
        cfg.material.alpha = v;
    }
    if let Some(v) = c.beta {
        cfg.material.beta = v;
    }
    if let Some(v) = c.seed {
        cfg.experiment.seed = v;
    }
    if c.project {
        cfg.scheme.project = true;
    }
}

const FILM_EXTENT: [f64; 3] = [1e-6, 2e-6, 2e-8];

/// 1 x 2 x 0.02 um Permalloy element with every field term, one-picosecond
/// steps and projection.
fn film_preset(cfg: &mut RunConfig, cells: [usize; 3]) {
    let p = PhysicalConstants::permalloy(2e-6);
    cfg.grid = GridSection { dim: 3, cells: cells.to_vec(), extent: FILM_EXTENT.to_vec() };
    cfg.material = MaterialSection {
        alpha: 0.1,
        beta: 3.0,
        ms: Some(p.ms),
        mu0: Some(p.mu0),
        cex: Some(p.cex),
        ku: Some(p.ku),
        length: Some(p.length),
        anisotropy: true,
        demag: true,
        zeeman: true,
        ..MaterialSection::default()
    };
    cfg.scheme.k = 1e-12 / p.time_unit();
    cfg.scheme.project = true;
}

fn film(cfg: &RunConfig) -> Result<FilmSetup, CliError> {
    let phys = cfg.physical().ok_or_else(|| CliError::Usage("film experiments need physical material constants".into()))?;
    if cfg.grid.dim != 3 {
        return Err(ConfigError::Invalid { field: "grid.dim".into(), reason: "film experiments need dim = 3".into() }.into());
    }
    let grid = cfg.grid_spec().map_err(ExperimentError::from)?;
    Ok(FilmSetup { grid, phys, params: cfg.material_params() })
}

fn manufactured_only(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.material.has_physical() || cfg.material.eps.is_some_and(|e| e != 1.0) || cfg.material.q.is_some_and(|q| q != 0.0) {
        return Err(ConfigError::Invalid {
            field: "material".into(),
            reason: "manufactured-solution experiments use the reduced model with eps = 1, q = 0".into(),
        }
        .into());
    }
    Ok(())
}

fn open_run(cfg: &RunConfig) -> Result<RunDir, CliError> {
    let dir = RunDir::create(cfg)?;
    println!("output: {}", dir.path.display());
    Ok(dir)
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Converge { common, refinement, ks, cells_list, coupling } => {
            let (mut cfg, from_file) = load(&common)?;
            let refinement = refinement.unwrap_or_else(|| cfg.experiment.refinement.clone());
            let dim = common.dim.unwrap_or(cfg.grid.dim);
            if !from_file {
                converge_preset(&mut cfg, &refinement, dim);
            }
            apply_common(&mut cfg, &common);
            let x = &mut cfg.experiment;
            x.kind = ExperimentKind::Converge;
            x.refinement = refinement;
            if let Some(v) = ks {
                x.ks = v;
            }
            if let Some(v) = cells_list {
                x.cells_list = v;
            }
            if let Some(v) = coupling {
                x.coupling = v;
            }
            let n = cfg.grid.cells.first().copied().unwrap_or(1);
            if cfg.experiment.ks.is_empty() {
                cfg.experiment.ks = (0..4).map(|i| cfg.scheme.k / f64::from(1 << i)).collect();
            }
            if cfg.experiment.cells_list.is_empty() {
                cfg.experiment.cells_list = (1..=4).map(|i| i * n).collect();
            }
            let cfg = cfg.resolve()?;
            manufactured_only(&cfg)?;
            let x = &cfg.experiment;
            let refinement = match x.refinement.as_str() {
                "temporal" => Refinement::Temporal { cells: cfg.cells()[0], ks: x.ks.clone() },
                "spatial" => Refinement::Spatial { k: cfg.scheme.k, cells: x.cells_list.clone() },
                _ => Refinement::Coupled { c: x.coupling, cells: x.cells_list.clone() },
            };
            let spec = ConvergenceSpec {
                scheme: cfg.scheme_id(),
                dim: cfg.dim(),
                alpha: cfg.material.alpha,
                beta: cfg.material.beta,
                t_final: cfg.scheme.t_final,
                refinement,
                project: cfg.scheme.project,
                gmres: cfg.gmres(),
            };
            let dir = open_run(&cfg)?;
            let report = convergence_study(&spec)?;
            let mut table = CsvTable::new(["k", "h", "linf", "l2", "h1"]);
            for s in &report.samples {
                table.push_numbers(&[s.k, s.h, s.linf, s.l2, s.h1]);
                println!("k={:.4e} h={:.4e} linf={:.4e} l2={:.4e} h1={:.4e}", s.k, s.h, s.linf, s.l2, s.h1);
            }
            let o = report.order;
            table.push(vec!["order".into(), String::new(), fmt_f64(o.linf), fmt_f64(o.l2), fmt_f64(o.h1)]);
            println!("order linf={:.4} l2={:.4} h1={:.4}", o.linf, o.l2, o.h1);
            dir.write_csv("errors.csv", &table)?;
        }
        Cmd::BetaSweep { common, betas, alphas } => {
            let (mut cfg, from_file) = load(&common)?;
            if !from_file {
                cfg.grid = GridSection { dim: 3, cells: vec![8], extent: vec![1.0] };
                cfg.scheme.k = 1.0 / 4000.0;
                cfg.scheme.t_final = 1.0;
            }
            apply_common(&mut cfg, &common);
            cfg.experiment.kind = ExperimentKind::BetaSweep;
            if let Some(v) = betas {
                cfg.experiment.betas = v;
            }
            if let Some(v) = alphas {
                cfg.experiment.alphas = v;
            }
            let cfg = cfg.resolve()?;
            manufactured_only(&cfg)?;
            let dir = open_run(&cfg)?;
            let x = &cfg.experiment;
            let rows = beta_sweep(cfg.scheme_id(), &x.betas, &x.alphas, cfg.dim(), cfg.cells()[0], cfg.scheme.k, cfg.scheme.t_final)?;
            let mut table = CsvTable::new(["beta", "alpha", "linf", "l2", "h1"]);
            for r in &rows {
                table.push_numbers(&[r.beta, r.alpha, r.sample.linf, r.sample.l2, r.sample.h1]);
                println!("beta={} alpha={} linf={:.6e} l2={:.6e}", r.beta, r.alpha, r.sample.linf, r.sample.l2);
            }
            dir.write_csv("beta_sweep.csv", &table)?;
        }
        Cmd::Stability { common, trials, k_over_h2, n_steps } => {
            let (mut cfg, _) = load(&common)?;
            apply_common(&mut cfg, &common);
            let x = &mut cfg.experiment;
            x.kind = ExperimentKind::Stability;
            if let Some(v) = trials {
                x.trials = v;
            }
            if let Some(v) = k_over_h2 {
                x.k_over_h2 = v;
            }
            if let Some(v) = n_steps {
                x.n_steps = v;
            }
            let cfg = cfg.resolve()?;
            manufactured_only(&cfg)?;
            let dir = open_run(&cfg)?;
            let x = &cfg.experiment;
            let report = stability_probe(&StabilityConfig {
                grid: cfg.grid_spec().map_err(ExperimentError::from)?,
                beta: cfg.material.beta,
                k_over_h2: x.k_over_h2.clone(),
                n_steps: x.n_steps,
                trials: x.trials,
                seed: x.seed,
            })?;
            let mut table = CsvTable::new(["check", "max_excess", "violations"]);
            for (check, name, excess) in [
                (StabilityCheck::Step, "step", report.max_step_excess),
                (StabilityCheck::Cumulative, "cumulative", report.max_cumulative_excess),
                (StabilityCheck::CumulativeSquared, "cumulative_squared", report.max_cumulative_sq_excess),
            ] {
                let count = report.violations.iter().filter(|v| v.check == check).count();
                table.push(vec![name.into(), fmt_f64(excess), count.to_string()]);
                println!("{name}: max excess {excess:.3e}, {count} violations");
            }
            dir.write_csv("stability.csv", &table)?;
        }
        Cmd::Relax { common, initializer, max_steps, full } => {
            let (mut cfg, _) = load(&common)?;
            if !cfg.material.has_physical() {
                film_preset(&mut cfg, if full { [64, 128, 1] } else { [32, 64, 1] });
            }
            apply_common(&mut cfg, &common);
            let x = &mut cfg.experiment;
            x.kind = ExperimentKind::Relax;
            if let Some(v) = initializer {
                x.initializer = v;
            }
            if let Some(v) = max_steps {
                x.max_steps = v;
            }
            let cfg = cfg.resolve()?;
            let setup = film(&cfg)?;
            let terms = cfg.field_terms();
            let model = if terms.demag {
                let demag = DemagTensor::build(&setup.grid).map_err(ExperimentError::from)?;
                LlModel::with_demag(setup.grid, setup.params, terms, RhsForm::CrossProduct, demag)
            } else {
                LlModel::new(setup.grid, setup.params, terms, RhsForm::CrossProduct)
            }
            .map_err(ExperimentError::from)?;
            let x = &cfg.experiment;
            let rc = RelaxConfig {
                scheme: cfg.scheme_id(),
                k: cfg.scheme.k,
                max_steps: x.max_steps,
                steady_tol: x.steady_tol,
                record_every: x.record_every,
                project: cfg.scheme.project,
            };
            let dir = open_run(&cfg)?;
            let result = relax(model, initial_field(setup.grid, cfg.initializer()), &rc)?;
            let mut table = CsvTable::new(["step", "t", "E_exchange", "E_anis", "E_demag", "E_zeeman", "E_total"]);
            for r in &result.trace {
                let e = r.energy;
                let mut row = vec![r.step.to_string()];
                row.extend([r.t, e.exchange, e.anisotropy, e.demag, e.zeeman, e.total].map(fmt_f64));
                table.push(row);
            }
            dir.write_csv("energy.csv", &table)?;
            dir.write_snapshot("final.llmf", &FieldSnapshot::from_field(&result.m, result.trace.last().map_or(0.0, |r| r.t)))?;
            println!("{}: {} steps, converged={}, E={:.10e}", cfg.experiment.initializer, result.steps, result.converged, result.energy.total);
        }
        Cmd::Hysteresis { common, axis, field_steps, paper_scale } => {
            let (mut cfg, _) = load(&common)?;
            if !cfg.material.has_physical() {
                film_preset(&mut cfg, if paper_scale { [50, 100, 1] } else { [25, 50, 1] });
                cfg.experiment.max_steps = 4000;
            }
            apply_common(&mut cfg, &common);
            let x = &mut cfg.experiment;
            x.kind = ExperimentKind::Hysteresis;
            if let Some(v) = axis {
                x.loop_axis = v;
            }
            if let Some(v) = field_steps {
                x.field_steps = v;
            }
            let cfg = cfg.resolve()?;
            let setup = film(&cfg)?;
            let x = &cfg.experiment;
            let mut lc = LoopConfig::new(cfg.loop_axis(), x.field_steps, cfg.scheme.k);
            lc.canting_deg = x.canting_deg;
            lc.h_max_mt = x.h_max_mt;
            lc.steady_tol = x.steady_tol;
            lc.max_steps_per_field = x.max_steps;
            lc.relax.scheme = cfg.scheme_id();
            lc.relax.project = cfg.scheme.project;
            let dir = open_run(&cfg)?;
            let r = hysteresis(&setup, &lc)?;
            let mut table = CsvTable::new(["branch", "h_mt", "mx", "my", "mz", "steps", "converged"]);
            for (name, branch) in [("descending", &r.descending), ("ascending", &r.ascending)] {
                for s in branch.iter() {
                    let mut row = vec![name.to_string()];
                    row.extend([s.h_mt, s.mean[0], s.mean[1], s.mean[2]].map(fmt_f64));
                    row.extend([s.steps.to_string(), s.converged.to_string()]);
                    table.push(row);
                }
            }
            dir.write_csv("loop.csv", &table)?;
            let mut summary = CsvTable::new(["branch", "coercivity_mt", "remanence_x", "remanence_y", "remanence_z"]);
            for (i, name) in ["descending", "ascending"].iter().enumerate() {
                let mut row = vec![name.to_string(), r.coercivity_mt[i].map(fmt_f64).unwrap_or_default()];
                row.extend(r.remanence[i].map_or([const { String::new() }; 3], |m| m.map(fmt_f64)));
                summary.push(row);
            }
            dir.write_csv("coercivity.csv", &summary)?;
            println!("coercivity (mT): {:?}, unconverged fields: {}", r.coercivity_mt, r.unconverged().len());
        }
        Cmd::Bench { common, schemes, ks, repeats, target } => {
            let (mut cfg, from_file) = load(&common)?;
            if !from_file {
                cfg.grid = GridSection { dim: 1, cells: vec![200], extent: vec![1.0] };
                cfg.scheme.t_final = 1e-3;
                cfg.experiment.ks = [5.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0, 120.0].iter().map(|d| 1e-3 / d).collect();
            }
            apply_common(&mut cfg, &common);
            let x = &mut cfg.experiment;
            x.kind = ExperimentKind::Bench;
            if let Some(v) = schemes {
                x.schemes = v;
            }
            if let Some(v) = ks {
                x.ks = v;
            }
            if let Some(v) = repeats {
                x.repeats = v;
            }
            if let Some(v) = target {
                x.target_error = v;
            }
            if x.ks.is_empty() {
                x.ks = (0..4).map(|i| cfg.scheme.k / f64::from(1 << i)).collect();
            }
            let cfg = cfg.resolve()?;
            manufactured_only(&cfg)?;
            let x = &cfg.experiment;
            let ids: Vec<SchemeId> = x.schemes.iter().map(|s| s.parse().expect("validated")).collect();
            let dir = open_run(&cfg)?;
            let table = efficiency_bench(&ids, cfg.dim(), cfg.cells()[0], &x.ks, cfg.scheme.t_final, x.repeats)?;
            let mut csv = CsvTable::new(["scheme", "k", "h", "linf", "l2", "wall_seconds"]);
            for (id, samples) in &table.rows {
                for s in samples {
                    let mut row = vec![id.name().to_string()];
                    row.extend([s.k, s.h, s.linf, s.l2, s.wall_seconds].map(fmt_f64));
                    csv.push(row);
                }
            }
            dir.write_csv("bench.csv", &csv)?;
            let mut summary = CsvTable::new(["scheme", "seconds_to_target"]);
            for (id, samples) in &table.rows {
                let t = time_to_error(samples, x.target_error);
                summary.push(vec![id.name().into(), t.map(fmt_f64).unwrap_or_default()]);
                println!("{}: time to {:e} = {}", id.name(), x.target_error, t.map_or("not reached".into(), |t| format!("{t:.4e} s")));
            }
            dir.write_csv("time_to_error.csv", &summary)?;
            for (id, k, msg) in &table.failures {
                eprintln!("warning: {} failed at k={k:e}: {msg}", id.name());
            }
        }
        Cmd::DumpTableau { scheme } => {
            let id: SchemeId = scheme.parse().map_err(CliError::Usage)?;
            let tab = builtin_tableau(id).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{} ({} stages)", id.name(), tab.stages());
            println!("c = {:?}", tab.c);
            println!("A_im =");
            for row in &tab.a_im {
                println!("  {row:?}");
            }
            println!("b_im = {:?}", tab.b_im);
            println!("A_ex =");
            for row in &tab.a_ex {
                println!("  {row:?}");
            }
            println!("b_ex = {:?}", tab.b_ex);
        }
    }
    Ok(())
}

fn converge_preset(cfg: &mut RunConfig, refinement: &str, dim: usize) {
    let three = dim == 3;
    cfg.grid = GridSection { dim, cells: vec![if three { 8 } else { 400 }], extent: vec![1.0] };
    let x = &mut cfg.experiment;
    match (refinement, three) {
        ("temporal", false) => {
            cfg.scheme.t_final = 1e-3;
            x.ks = [5.0, 10.0, 15.0, 20.0, 25.0].iter().map(|d| 1e-3 / d).collect();
        }
        ("temporal", true) => {
            cfg.scheme.t_final = 1.0;
            x.ks = (4..=10).map(|d| 1.0 / d as f64).collect();
        }
        ("spatial", false) => {
            cfg.scheme.k = 1e-7;
            cfg.scheme.t_final = 1e-3;
            x.cells_list = vec![50, 100, 150, 200, 250];
        }
        ("spatial", true) => {
            cfg.scheme.k = 1e-4;
            cfg.scheme.t_final = 1e-2;
            x.cells_list = vec![4, 6, 8, 10];
        }
        (_, _) => {
            cfg.scheme.t_final = 1.0;
            x.coupling = if three { 0.001 } else { 0.01 };
            x.cells_list = vec![3, 4, 5, 6];
        }
    }
}
