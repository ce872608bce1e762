//! Run configuration read from TOML with the sections `[grid]`,
//! `[material]`, `[scheme]`, `[experiment]` and `[output]`.
//!
//! Every key is optional. Unknown keys are rejected and the error lists the
//! keys that section accepts. The material is given either by physical
//! constants (`ms`, `mu0`, `cex`, `ku`, `length`, SI units, extents in
//! meters) or by the reduced pair (`eps`, `q`), never both. With neither,
//! `eps = 1, q = 0`.
//!
//! `beta` is measured in units of `eps`: the implicit diffusion coefficient
//! is `beta * eps`. For the reduced default `eps = 1` this is `beta` itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::magnetics::{Initializer, LoopAxis};
use crate::grid::{Dim, GridSpec};
use crate::linsolve::GmresConfig;
use crate::physics::{FieldTerms, MaterialParams, PhysicalConstants, MU0};
use crate::steppers::SchemeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    Converge,
    BetaSweep,
    Stability,
    Relax,
    Hysteresis,
    Bench,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::BetaSweep => "beta-sweep",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Relax => "relax",
            ExperimentKind::Hysteresis => "hysteresis",
            ExperimentKind::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub material: MaterialSection,
    pub scheme: SchemeSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// 1 or 3.
    pub dim: usize,
    /// One entry for every axis alike, or three.
    pub cells: Vec<usize>,
    pub extent: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dim: 1, cells: vec![64], extent: vec![1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSection {
    pub alpha: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cex: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ku: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    pub exchange: bool,
    pub anisotropy: bool,
    pub demag: bool,
    pub zeeman: bool,
    /// Reduced applied field.
    pub h_ext: [f64; 3],
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 5.0,
            eps: None,
            q: None,
            ms: None,
            mu0: None,
            cex: None,
            ku: None,
            length: None,
            exchange: true,
            anisotropy: false,
            demag: false,
            zeeman: false,
            h_ext: [0.0; 3],
        }
    }
}

impl MaterialSection {
    pub fn has_physical(&self) -> bool {
        [self.ms, self.mu0, self.cex, self.ku, self.length].iter().any(Option::is_some)
    }

    pub fn has_reduced(&self) -> bool {
        self.eps.is_some() || self.q.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub id: String,
    pub k: f64,
    pub t_final: f64,
    pub project: bool,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    pub gmres_rel_tol: f64,
}

impl Default for SchemeSection {
    fn default() -> Self {
        let g = GmresConfig::default();
        Self {
            id: SchemeId::ImexRk2.name().into(),
            k: 1e-3,
            t_final: 1.0,
            project: false,
            gmres_restart: g.restart,
            gmres_max_iter: g.max_iter,
            gmres_rel_tol: g.rel_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub initializer: String,
    /// `temporal`, `spatial` or `coupled`.
    pub refinement: String,
    /// Step sizes of a temporal sweep.
    pub ks: Vec<f64>,
    /// Cells per axis of a spatial or coupled sweep.
    pub cells_list: Vec<usize>,
    /// `c` in `k = c h^(2/3)`.
    pub coupling: f64,
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub trials: usize,
    pub k_over_h2: Vec<f64>,
    pub n_steps: usize,
    pub max_steps: usize,
    pub steady_tol: f64,
    pub record_every: usize,
    /// `x` or `y`.
    pub loop_axis: String,
    pub field_steps: usize,
    pub h_max_mt: f64,
    pub canting_deg: f64,
    pub schemes: Vec<String>,
    pub repeats: usize,
    pub target_error: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Converge,
            seed: 0,
            initializer: "s_state".into(),
            refinement: "temporal".into(),
            ks: Vec::new(),
            cells_list: Vec::new(),
            coupling: 0.01,
            betas: vec![1.0, 3.0, 4.0],
            alphas: vec![0.001, 0.01],
            trials: 100,
            k_over_h2: vec![0.1, 1.0, 10.0, 100.0],
            n_steps: 50,
            max_steps: 20_000,
            steady_tol: 1e-9,
            record_every: 10,
            loop_axis: "y".into(),
            field_steps: 50,
            h_max_mt: 50.0,
            canting_deg: 1.0,
            schemes: vec!["imexrk2".into(), "bdf2".into()],
            repeats: 3,
            target_error: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "runs".into() }
    }
}

/// Parses, validates and resolves defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_unresolved(text)?.resolve()
}

/// Parses without validation, for callers that layer overrides on top
/// before calling [`RunConfig::resolve`].
pub fn parse_unresolved(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {x}")))
    }
}

fn per_axis<T: Copy>(field: &str, v: &[T], axes: usize, fill: T) -> Result<[T; 3], ConfigError> {
    match (v.len(), axes) {
        (1, _) => Ok(if axes == 3 { [v[0]; 3] } else { [v[0], fill, fill] }),
        (3, 3) => Ok([v[0], v[1], v[2]]),
        _ => Err(invalid(field, format!("expected 1 entry{}, got {}", if axes == 3 { " or 3" } else { "" }, v.len()))),
    }
}

impl RunConfig {
    /// Checks every invariant and fills the derived defaults, so the result
    /// echoes back as a complete manifest.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        let g = &self.grid;
        if g.dim != 1 && g.dim != 3 {
            return Err(invalid("grid.dim", "must be 1 or 3"));
        }
        let cells = per_axis("grid.cells", &g.cells, g.dim, 1)?;
        if cells.contains(&0) {
            return Err(invalid("grid.cells", "must be positive"));
        }
        for e in per_axis("grid.extent", &g.extent, g.dim, 1.0)? {
            positive("grid.extent", e)?;
        }

        let m = &mut self.material;
        positive("alpha", m.alpha)?;
        if !(m.beta >= 0.0 && m.beta.is_finite()) {
            return Err(invalid("beta", format!("must be non-negative, got {}", m.beta)));
        }
        if m.has_physical() && m.has_reduced() {
            return Err(invalid(
                "material",
                "physical constants (ms, mu0, cex, ku, length) and reduced parameters (eps, q) are mutually exclusive",
            ));
        }
        if m.has_physical() {
            let ms = m.ms.ok_or_else(|| invalid("ms", "required with physical constants"))?;
            let cex = m.cex.ok_or_else(|| invalid("cex", "required with physical constants"))?;
            positive("ms", ms)?;
            positive("cex", cex)?;
            positive("mu0", *m.mu0.get_or_insert(MU0))?;
            let ku = *m.ku.get_or_insert(0.0);
            if !ku.is_finite() {
                return Err(invalid("ku", "must be finite"));
            }
            let largest = self.grid.extent.iter().cloned().fold(0.0, f64::max);
            positive("length", *m.length.get_or_insert(largest))?;
        } else {
            let eps = *m.eps.get_or_insert(1.0);
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(invalid("eps", "must be non-negative"));
            }
            if !m.q.get_or_insert(0.0).is_finite() {
                return Err(invalid("q", "must be finite"));
            }
        }
        if m.h_ext.iter().any(|h| !h.is_finite()) {
            return Err(invalid("h_ext", "must be finite"));
        }
        if m.demag && self.grid.dim != 3 {
            return Err(invalid("demag", "the stray field needs dim = 3"));
        }

        let s = &mut self.scheme;
        s.id = s.id.parse::<SchemeId>().map_err(|e| invalid("scheme.id", e))?.name().to_string();
        positive("k", s.k)?;
        positive("t_final", s.t_final)?;
        positive("gmres_rel_tol", s.gmres_rel_tol)?;
        if s.gmres_restart == 0 || s.gmres_max_iter == 0 {
            return Err(invalid("gmres_restart", "restart and iteration limits must be positive"));
        }

        let x = &mut self.experiment;
        if i64::try_from(x.seed).is_err() {
            return Err(invalid("seed", "must fit in a signed 64-bit integer"));
        }
        let init = Initializer::parse(&x.initializer).ok_or_else(|| invalid("initializer", "expected landau, c_state, s_state or uniform"))?;
        x.initializer = init.name().to_string();
        if !matches!(x.refinement.as_str(), "temporal" | "spatial" | "coupled") {
            return Err(invalid("refinement", "expected temporal, spatial or coupled"));
        }
        for &k in &x.ks {
            positive("ks", k)?;
        }
        if x.cells_list.contains(&0) {
            return Err(invalid("cells_list", "must be positive"));
        }
        positive("coupling", x.coupling)?;
        for &b in &x.betas {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(invalid("betas", "must be non-negative"));
            }
        }
        for &a in &x.alphas {
            positive("alphas", a)?;
        }
        for &r in &x.k_over_h2 {
            positive("k_over_h2", r)?;
        }
        positive("steady_tol", x.steady_tol)?;
        positive("h_max_mt", x.h_max_mt)?;
        positive("target_error", x.target_error)?;
        if !x.canting_deg.is_finite() {
            return Err(invalid("canting_deg", "must be finite"));
        }
        if x.record_every == 0 || x.repeats == 0 || x.field_steps == 0 {
            return Err(invalid("experiment", "record_every, repeats and field_steps must be positive"));
        }
        x.loop_axis = match x.loop_axis.to_ascii_lowercase().as_str() {
            "x" => "x".into(),
            "y" => "y".into(),
            _ => return Err(invalid("loop_axis", "expected x or y")),
        };
        for id in &mut x.schemes {
            *id = id.parse::<SchemeId>().map_err(|e| invalid("schemes", e))?.name().to_string();
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(self)
    }

    pub fn dim(&self) -> Dim {
        if self.grid.dim == 3 {
            Dim::Three
        } else {
            Dim::One
        }
    }

    pub fn physical(&self) -> Option<PhysicalConstants> {
        let m = &self.material;
        Some(PhysicalConstants { ms: m.ms?, mu0: m.mu0.unwrap_or(MU0), cex: m.cex?, ku: m.ku.unwrap_or(0.0), length: m.length? })
    }

    pub fn cells(&self) -> [usize; 3] {
        per_axis("grid.cells", &self.grid.cells, self.grid.dim, 1).unwrap_or([1; 3])
    }

    /// Reduced grid; physical extents are divided by `length`.
    pub fn grid_spec(&self) -> Result<GridSpec, crate::grid::GridError> {
        let scale = self.physical().map_or(1.0, |p| p.length);
        let ext = per_axis("grid.extent", &self.grid.extent, self.grid.dim, 1.0).unwrap_or([1.0; 3]).map(|e| e / scale);
        match self.dim() {
            Dim::One => GridSpec::new_1d(self.cells()[0], ext[0]),
            Dim::Three => GridSpec::new_3d(self.cells(), ext),
        }
    }

    pub fn material_params(&self) -> MaterialParams {
        let m = &self.material;
        match self.physical() {
            Some(p) => MaterialParams::from_physical(p, m.alpha, m.beta * p.eps()),
            None => {
                let eps = m.eps.unwrap_or(1.0);
                MaterialParams::dimensionless(eps, m.q.unwrap_or(0.0), m.alpha, m.beta * eps)
            }
        }
    }

    pub fn field_terms(&self) -> FieldTerms {
        let m = &self.material;
        FieldTerms { exchange: m.exchange, anisotropy: m.anisotropy, demag: m.demag, zeeman: m.zeeman, h_ext: m.h_ext, forcing: None }
    }

    pub fn scheme_id(&self) -> SchemeId {
        self.scheme.id.parse().unwrap_or(SchemeId::ImexRk2)
    }

    pub fn gmres(&self) -> GmresConfig {
        GmresConfig { restart: self.scheme.gmres_restart, max_iter: self.scheme.gmres_max_iter, rel_tol: self.scheme.gmres_rel_tol }
    }

    pub fn initializer(&self) -> Initializer {
        Initializer::parse(&self.experiment.initializer).unwrap_or(Initializer::SState)
    }

    pub fn loop_axis(&self) -> LoopAxis {
        if self.experiment.loop_axis == "x" {
            LoopAxis::X
        } else {
            LoopAxis::Y
        }
    }

    /// The resolved configuration as TOML.
    pub fn to_manifest(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
