//! Effective field, right-hand sides and free energy of the Landau-Lifshitz
//! model in reduced units (lengths in units of `L`, fields in units of `Ms`).

pub mod demag;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::grid::{self, GridSpec, VectorField3};

pub use demag::DemagTensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("stray field requires a three-dimensional grid")]
    DemagNeeds3d,
    #[error("field lives on a different grid than the model")]
    GridMismatch,
    #[error("manufactured forcing and the stray field cannot be enabled together")]
    ForcingWithDemag,
    #[error("invalid material parameter {name}: {reason}")]
    BadParameter { name: &'static str, reason: String },
}

/// Vacuum permeability in N/A^2.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Gyromagnetic ratio in rad/(s T) used to convert reduced time.
pub const GAMMA: f64 = 1.76086e11;

#[inline]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Physical material constants (SI).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Saturation magnetization, A/m.
    pub ms: f64,
    /// Permeability, N/A^2.
    pub mu0: f64,
    /// Exchange constant, J/m.
    pub cex: f64,
    /// Uniaxial anisotropy constant, J/m^3.
    pub ku: f64,
    /// Nondimensionalization length, m.
    pub length: f64,
}

impl PhysicalConstants {
    /// Permalloy (Ni80Fe20) with the given reference length.
    pub fn permalloy(length: f64) -> Self {
        Self { ms: 8.0e5, mu0: MU0, cex: 1.3e-11, ku: 1.0e2, length }
    }

    pub fn eps(&self) -> f64 {
        self.cex / (self.mu0 * self.ms * self.ms * self.length * self.length)
    }

    pub fn q(&self) -> f64 {
        self.ku / (self.mu0 * self.ms * self.ms)
    }

    /// `mu0 * Ms` in tesla.
    pub fn saturation_tesla(&self) -> f64 {
        self.mu0 * self.ms
    }

    /// Applied field `mu0 H` given in millitesla, in units of `Ms`.
    pub fn reduced_field_from_mt(&self, millitesla: f64) -> f64 {
        millitesla * 1e-3 / self.saturation_tesla()
    }

    /// Seconds per unit of reduced time, `1 / (gamma mu0 Ms)`.
    pub fn time_unit(&self) -> f64 {
        1.0 / (GAMMA * self.saturation_tesla())
    }

    /// Joules per unit of reduced energy in three dimensions.
    pub fn energy_unit(&self) -> f64 {
        0.5 * self.mu0 * self.ms * self.ms * self.length.powi(3)
    }
}

/// Reduced material parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub eps: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub physical: Option<PhysicalConstants>,
}

impl MaterialParams {
    pub fn dimensionless(eps: f64, q: f64, alpha: f64, beta: f64) -> Self {
        Self { eps, q, alpha, beta, physical: None }
    }

    pub fn from_physical(phys: PhysicalConstants, alpha: f64, beta: f64) -> Self {
        Self { eps: phys.eps(), q: phys.q(), alpha, beta, physical: Some(phys) }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let bad = |name, reason: &str| Err(PhysicsError::BadParameter { name, reason: reason.to_string() });
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", "must be positive");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta", "must be non-negative");
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad("eps", "must be non-negative");
        }
        if !self.q.is_finite() {
            return bad("q", "must be finite");
        }
        Ok(())
    }
}

/// Space-time forcing `g(t, x)` added to the explicit part.
#[derive(Clone)]
pub struct Forcing(pub Arc<dyn Fn(f64, [f64; 3]) -> [f64; 3] + Send + Sync>);

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Forcing(..)")
    }
}

impl Forcing {
    pub fn new(f: impl Fn(f64, [f64; 3]) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn sample(&self, grid: &GridSpec, t: f64) -> VectorField3 {
        VectorField3::from_fn(*grid, |x| (self.0)(t, x))
    }
}

/// Which contributions enter the effective field.
#[derive(Debug, Clone)]
pub struct FieldTerms {
    pub exchange: bool,
    pub anisotropy: bool,
    pub demag: bool,
    pub zeeman: bool,
    /// Reduced applied field.
    pub h_ext: [f64; 3],
    pub forcing: Option<Forcing>,
}

impl Default for FieldTerms {
    fn default() -> Self {
        Self { exchange: true, anisotropy: false, demag: false, zeeman: false, h_ext: [0.0; 3], forcing: None }
    }
}

impl FieldTerms {
    /// Exchange only, no lower-order terms.
    pub fn exchange_only() -> Self {
        Self::default()
    }

    /// Exchange, anisotropy, stray field and Zeeman term.
    pub fn micromagnetic(h_ext: [f64; 3]) -> Self {
        Self { exchange: true, anisotropy: true, demag: true, zeeman: true, h_ext, forcing: None }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if self.forcing.is_some() && self.demag {
            return Err(PhysicsError::ForcingWithDemag);
        }
        Ok(())
    }
}

/// Which algebraic form of the torque is used for the explicit part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsForm {
    /// `-m x h - alpha m x (m x h)`.
    CrossProduct,
    /// `alpha h + alpha (eps |grad m|^2 - m . f) m - m x h`, valid for `|m| = 1`.
    Equivalent,
}

/// Dimensionless energy contributions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub exchange: f64,
    pub anisotropy: f64,
    pub demag: f64,
    pub zeeman: f64,
    pub total: f64,
}

/// Landau-Lifshitz model on a fixed grid.
#[derive(Debug, Clone)]
pub struct LlModel {
    pub params: MaterialParams,
    pub terms: FieldTerms,
    pub form: RhsForm,
    grid: GridSpec,
    demag: Option<DemagTensor>,
}

impl LlModel {
    pub fn new(grid: GridSpec, params: MaterialParams, terms: FieldTerms, form: RhsForm) -> Result<Self, PhysicsError> {
        params.validate()?;
        terms.validate()?;
        let demag = if terms.demag { Some(DemagTensor::build(&grid)?) } else { None };
        Ok(Self { params, terms, form, grid, demag })
    }

    /// Reuses an existing demag tensor (must match `grid`).
    pub fn with_demag(
        grid: GridSpec,
        params: MaterialParams,
        terms: FieldTerms,
        form: RhsForm,
        demag: DemagTensor,
    ) -> Result<Self, PhysicsError> {
        params.validate()?;
        terms.validate()?;
        if !demag.grid().same_shape(&grid) {
            return Err(PhysicsError::GridMismatch);
        }
        let demag = if terms.demag { Some(demag) } else { None };
        Ok(Self { params, terms, form, grid, demag })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn demag(&self) -> Option<&DemagTensor> {
        self.demag.as_ref()
    }

    fn check(&self, m: &VectorField3) -> Result<(), PhysicsError> {
        if m.grid().same_shape(&self.grid) {
            Ok(())
        } else {
            Err(PhysicsError::GridMismatch)
        }
    }

    /// Stray field, zero when the demag term is off.
    pub fn stray_field(&self, m: &VectorField3) -> Result<VectorField3, PhysicsError> {
        match &self.demag {
            Some(d) => d.stray_field(m),
            None => Ok(VectorField3::zeros(self.grid)),
        }
    }

    /// Lower-order field `f = -Q (m2 e2 + m3 e3) + h_s + h_e`.
    pub fn assemble_f(&self, m: &VectorField3) -> Result<VectorField3, PhysicsError> {
        self.check(m)?;
        let mut f = self.stray_field(m)?;
        let q = if self.terms.anisotropy { self.params.q } else { 0.0 };
        let he = if self.terms.zeeman { self.terms.h_ext } else { [0.0; 3] };
        for c in self.grid.interior() {
            let v = m.get(c);
            let mut out = f.get(c);
            out[1] -= q * v[1];
            out[2] -= q * v[2];
            for k in 0..3 {
                out[k] += he[k];
            }
            f.set(c, out);
        }
        f.fill_ghosts();
        Ok(f)
    }

    fn exchange_eps(&self) -> f64 {
        if self.terms.exchange {
            self.params.eps
        } else {
            0.0
        }
    }

    /// `eps lap_h m + f`.
    pub fn effective_field(&self, m: &VectorField3) -> Result<VectorField3, PhysicsError> {
        let mut h = self.assemble_f(m)?;
        let eps = self.exchange_eps();
        if eps != 0.0 {
            h.axpy(eps, &grid::laplacian(m));
        }
        h.fill_ghosts();
        Ok(h)
    }

    fn add_forcing(&self, t: f64, out: &mut VectorField3) {
        if let Some(g) = &self.terms.forcing {
            let grid = self.grid;
            let [nx, ny, nz] = grid.n();
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        let c = grid.cell(i, j, k);
                        let add = (g.0)(t, grid.center(i, j, k));
                        let mut v = out.get(c);
                        for q in 0..3 {
                            v[q] += add[q];
                        }
                        out.set(c, v);
                    }
                }
            }
        }
    }

    /// Landau-Lifshitz torque in cross-product form, without the artificial term.
    pub fn torque(&self, m: &VectorField3) -> Result<VectorField3, PhysicsError> {
        let h = self.effective_field(m)?;
        let alpha = self.params.alpha;
        let mut out = VectorField3::zeros(self.grid);
        for c in self.grid.interior() {
            let (mv, hv) = (m.get(c), h.get(c));
            let p = cross(mv, hv);
            let d = cross(mv, p);
            out.set(c, [-p[0] - alpha * d[0], -p[1] - alpha * d[1], -p[2] - alpha * d[2]]);
        }
        out.fill_ghosts();
        Ok(out)
    }

    /// Explicit part `N(t, m)` in cross-product form:
    /// torque minus `beta lap_h m`, plus forcing.
    pub fn rhs_full(&self, t: f64, m: &VectorField3) -> Result<VectorField3, PhysicsError> {
        let mut out = self.torque(m)?;
        if self.params.beta != 0.0 {
            out.axpy(-self.params.beta, &grid::laplacian(m));
        }
        self.add_forcing(t, &mut out);
        out.fill_ghosts();
        Ok(out)
    }

    /// Right side of the unit-length form
    /// `alpha (eps lap m + f) + alpha (eps |grad m|^2 - m . f) m - m x (eps lap m + f)`,
    /// plus forcing. `|grad m|^2` uses the centered gradient.
    pub fn rhs_equivalent_form(&self, t: f64, m: &VectorField3) -> Result<VectorField3, PhysicsError> {
        self.equivalent_shifted(t, m, 0.0)
    }

    /// Equivalent form minus `shift * lap_h m`.
    fn equivalent_shifted(&self, t: f64, m: &VectorField3, shift: f64) -> Result<VectorField3, PhysicsError> {
        self.check(m)?;
        let f = self.assemble_f(m)?;
        let eps = self.exchange_eps();
        let lap = grid::laplacian(m);
        let grad_sq = grid::gradient(m).squared_magnitudes();
        let alpha = self.params.alpha;
        let mut out = VectorField3::zeros(self.grid);
        for (idx, c) in self.grid.interior().enumerate() {
            let (mv, fv, lv) = (m.get(c), f.get(c), lap.get(c));
            let h = [eps * lv[0] + fv[0], eps * lv[1] + fv[1], eps * lv[2] + fv[2]];
            let s = alpha * (eps * grad_sq[idx] - dot(mv, fv));
            let p = cross(mv, h);
            out.set(c, [0, 1, 2].map(|q| alpha * h[q] + s * mv[q] - p[q] - shift * lv[q]));
        }
        self.add_forcing(t, &mut out);
        out.fill_ghosts();
        Ok(out)
    }

    /// `N(t, m)` in the configured form.
    pub fn explicit_part(&self, t: f64, m: &VectorField3) -> Result<VectorField3, PhysicsError> {
        match self.form {
            RhsForm::CrossProduct => self.rhs_full(t, m),
            RhsForm::Equivalent => self.equivalent_shifted(t, m, self.params.beta),
        }
    }

    /// Reduced free energy `h^d sum (eps |grad m|^2 + Q (m2^2 + m3^2) - h_s . m - 2 h_e . m)`.
    ///
    /// The exchange part uses face differences, the gradient paired with
    /// `lap_h` by summation by parts, so it is the energy whose variation
    /// is the discrete effective field.
    pub fn energy(&self, m: &VectorField3) -> Result<EnergyBreakdown, PhysicsError> {
        self.check(m)?;
        let vol = self.grid.cell_volume();
        let exchange = if self.terms.exchange {
            self.params.eps * grid::tensor_norm_sq(&grid::face_gradient(m))
        } else {
            0.0
        };
        let mut anisotropy = 0.0;
        let mut demag = 0.0;
        let mut zeeman = 0.0;
        let hs = match &self.demag {
            Some(d) => Some(d.stray_field(m)?),
            None => None,
        };
        for c in self.grid.interior() {
            let v = m.get(c);
            if self.terms.anisotropy {
                anisotropy += self.params.q * (v[1] * v[1] + v[2] * v[2]);
            }
            if let Some(hs) = &hs {
                demag -= dot(hs.get(c), v);
            }
            if self.terms.zeeman {
                zeeman -= 2.0 * dot(self.terms.h_ext, v);
            }
        }
        let (anisotropy, demag, zeeman) = (anisotropy * vol, demag * vol, zeeman * vol);
        Ok(EnergyBreakdown { exchange, anisotropy, demag, zeeman, total: exchange + anisotropy + demag + zeeman })
    }
}

/// Discrete nonlinear term of the damping-only model with `beta = alpha eps`:
/// `beta |A_h grad_h m|^2 m - alpha m x (m x f)`.
pub fn rhs_simplified(m: &VectorField3, params: &MaterialParams, f_static: &VectorField3) -> VectorField3 {
    let g = *m.grid();
    let grad_sq = grid::avg_gradient(m).squared_magnitudes();
    let mut out = VectorField3::zeros(g);
    for (idx, c) in g.interior().enumerate() {
        let (mv, fv) = (m.get(c), f_static.get(c));
        let d = cross(mv, cross(mv, fv));
        let s = params.beta * grad_sq[idx];
        out.set(c, [s * mv[0] - params.alpha * d[0], s * mv[1] - params.alpha * d[1], s * mv[2] - params.alpha * d[2]]);
    }
    out.fill_ghosts();
    out
}

/// Pointwise `m / |m|`.
pub fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}
