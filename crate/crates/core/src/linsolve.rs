//! Linear solvers for the implicit parts of the time steppers.
//!
//! Every IMEX stage solves `(I - lambda * lap_h) x = b` componentwise with a
//! constant `lambda >= 0`. The cell-centered Laplacian with mirrored ghosts is
//! diagonalised by the type-II cosine transform, so a solve is one forward
//! transform per axis, a per-mode division and one inverse transform per axis.
//!
//! The BDF2 system has variable, non-symmetric coefficients and goes through
//! restarted GMRES instead.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustdct::{DctPlanner, TransformType2And3};
use thiserror::Error;

use crate::grid::{GridSpec, VectorField3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("Helmholtz coefficient must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("right-hand side lives on a different grid than the plan")]
    GridMismatch,
    #[error("dense oracle limited to {limit} cells, grid has {cells}")]
    TooLarge { cells: usize, limit: usize },
    #[error("dense factorisation failed (singular matrix)")]
    Singular,
}

/// Cell limit for [`dense_oracle_solve`].
pub const DENSE_CELL_LIMIT: usize = 4096;

/// Eigenvalues of the one-dimensional Neumann second difference on `n`
/// cells of width `h`: `(2/h^2)(cos(pi k / n) - 1)`.
pub fn neumann_eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 / (h * h) * ((std::f64::consts::PI * k as f64 / n as f64).cos() - 1.0))
        .collect()
}

/// Precomputed cosine-transform solver for `(I - lambda * lap_h) x = b`.
#[derive(Clone)]
pub struct HelmholtzPlan {
    grid: GridSpec,
    lambda: f64,
    denominators: Vec<f64>,
    transforms: Vec<Arc<dyn TransformType2And3<f64>>>,
}

impl fmt::Debug for HelmholtzPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HelmholtzPlan")
            .field("grid", &self.grid)
            .field("lambda", &self.lambda)
            .finish_non_exhaustive()
    }
}

impl HelmholtzPlan {
    pub fn new(grid: GridSpec, lambda: f64) -> Result<Self, SolveError> {
        if !(lambda >= 0.0) {
            return Err(SolveError::NegativeLambda(lambda));
        }
        let n = grid.n();
        let h = grid.h();
        let axes = grid.axes();
        let eig: Vec<Vec<f64>> = (0..3)
            .map(|a| if a < axes { neumann_eigenvalues(n[a], h[a]) } else { vec![0.0] })
            .collect();
        let mut denominators = Vec::with_capacity(grid.cell_count());
        for kz in 0..n[2] {
            for ky in 0..n[1] {
                for kx in 0..n[0] {
                    let mu = eig[0][kx] + eig[1].get(ky).copied().unwrap_or(0.0) + eig[2].get(kz).copied().unwrap_or(0.0);
                    denominators.push(1.0 - lambda * mu);
                }
            }
        }
        let mut planner = DctPlanner::new();
        let transforms = (0..axes).map(|a| planner.plan_dct2(n[a])).collect();
        Ok(Self { grid, lambda, denominators, transforms })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Per-mode values `1 - lambda * mu_k`, x-fastest mode order.
    pub fn denominators(&self) -> &[f64] {
        &self.denominators
    }

    /// Laplacian eigenvalue attached to every mode, x-fastest mode order.
    pub fn spectrum(&self) -> Vec<f64> {
        let n = self.grid.n();
        let h = self.grid.h();
        let axes = self.grid.axes();
        let eig: Vec<Vec<f64>> = (0..axes).map(|a| neumann_eigenvalues(n[a], h[a])).collect();
        let mut out = Vec::with_capacity(self.grid.cell_count());
        for kz in 0..n[2] {
            for ky in 0..n[1] {
                for kx in 0..n[0] {
                    let k = [kx, ky, kz];
                    out.push((0..axes).map(|a| eig[a][k[a]]).sum());
                }
            }
        }
        out
    }

    /// Solves `(I - lambda * lap_h) x = b` per component; ghosts of the result are filled.
    pub fn solve(&self, rhs: &VectorField3) -> Result<VectorField3, SolveError> {
        if !rhs.grid().same_shape(&self.grid) {
            return Err(SolveError::GridMismatch);
        }
        if self.lambda == 0.0 {
            return Ok(rhs.clone());
        }
        let cells = self.grid.cell_count();
        let n = self.grid.n();
        let axes = self.grid.axes();
        // length-1 axes are never transformed and carry no normalisation
        let scale: f64 = (0..axes).filter(|&a| n[a] > 1).map(|a| 2.0 / n[a] as f64).product();
        let mut out = VectorField3::zeros(self.grid);
        let mut buf = vec![0.0; cells];
        let scratch_len = self.transforms.iter().map(|t| t.get_scratch_len()).max().unwrap_or(0);
        let mut scratch = vec![0.0; scratch_len];
        let mut line = vec![0.0; n.iter().copied().max().unwrap_or(1)];
        for q in 0..3 {
            for (slot, c) in buf.iter_mut().zip(self.grid.interior()) {
                *slot = rhs.data()[3 * c + q];
            }
            for a in 0..axes {
                self.along_axis(a, &mut buf, &mut line, &mut scratch, true);
            }
            for (v, d) in buf.iter_mut().zip(&self.denominators) {
                *v *= scale / d;
            }
            for a in 0..axes {
                self.along_axis(a, &mut buf, &mut line, &mut scratch, false);
            }
            for (v, c) in buf.iter().zip(self.grid.interior()) {
                out.data_mut()[3 * c + q] = *v;
            }
        }
        out.fill_ghosts();
        Ok(out)
    }

    fn along_axis(&self, axis: usize, buf: &mut [f64], line: &mut [f64], scratch: &mut [f64], forward: bool) {
        let n = self.grid.n();
        let len = n[axis];
        if len == 1 {
            return;
        }
        let stride = match axis {
            0 => 1,
            1 => n[0],
            _ => n[0] * n[1],
        };
        let line = &mut line[..len];
        let t = &self.transforms[axis];
        // every line start: all indices whose coordinate along `axis` is zero
        let starts = (0..n[2]).flat_map(|k| (0..n[1]).flat_map(move |j| (0..n[0]).map(move |i| (i, j, k))));
        for (i, j, k) in starts {
            let coord = [i, j, k][axis];
            if coord != 0 {
                continue;
            }
            let base = i + n[0] * (j + n[1] * k);
            for (p, v) in line.iter_mut().enumerate() {
                *v = buf[base + p * stride];
            }
            if forward {
                t.process_dct2_with_scratch(line, scratch);
            } else {
                t.process_dct3_with_scratch(line, scratch);
            }
            for (p, v) in line.iter().enumerate() {
                buf[base + p * stride] = *v;
            }
        }
    }
}

/// Free-function form of [`HelmholtzPlan::solve`].
pub fn helmholtz_solve(plan: &HelmholtzPlan, rhs: &VectorField3) -> Result<VectorField3, SolveError> {
    plan.solve(rhs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iter: usize,
    /// Required reduction of the residual relative to the initial one, so a
    /// warm start still gets solved rather than accepted as is. Bounded below
    /// by [`ROUNDOFF_FLOOR`] relative to `||b||`.
    pub rel_tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { restart: 30, max_iter: 500, rel_tol: 1e-9 }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.restart < 1 {
            return Err("gmres restart must be >= 1".into());
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(format!("gmres rel_tol must lie in (0, 1), got {}", self.rel_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// `||b - A x|| / ||b - A x0||` of the returned iterate (unpreconditioned).
    pub rel_residual: f64,
    pub diagnostic: Option<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Residuals below this fraction of `||b||` count as converged whatever
/// `rel_tol` asks for.
pub const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
///
/// `apply(x, y)` writes `A x` into `y`. With `precond` set the iteration runs
/// on the left-preconditioned system `M^{-1} A x = M^{-1} b`.
pub fn gmres(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: Option<&mut dyn FnMut(&[f64], &mut [f64])>,
    rhs: &[f64],
    x0: Option<&[f64]>,
    cfg: &GmresConfig,
) -> GmresOutcome {
    let n = rhs.len();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut tmp2 = vec![0.0; n];

    let true_residual = |apply: &mut dyn FnMut(&[f64], &mut [f64]), x: &[f64], out: &mut Vec<f64>| {
        let mut ax = vec![0.0; n];
        apply(x, &mut ax);
        for i in 0..n {
            out[i] = rhs[i] - ax[i];
        }
    };
    let precondition = |v: &[f64], out: &mut [f64], p: &mut Option<&mut dyn FnMut(&[f64], &mut [f64])>| match p {
        Some(m) => m(v, out),
        None => out.copy_from_slice(v),
    };

    let m = cfg.restart.max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut iters = 0;
    let mut diagnostic = None;

    let mut r = vec![0.0; n];
    true_residual(&mut apply, &x, &mut r);
    let r0_norm = norm(&r);
    if r0_norm == 0.0 {
        return GmresOutcome { x, iters: 0, converged: true, rel_residual: 0.0, diagnostic: None };
    }
    precondition(&r, &mut tmp, &mut precond);
    let mut beta = norm(&tmp);
    precondition(rhs, &mut tmp2, &mut precond);
    let target = (cfg.rel_tol * beta).max(ROUNDOFF_FLOOR * norm(&tmp2));

    loop {
        if beta <= target {
            break;
        }
        if iters >= cfg.max_iter {
            diagnostic = Some(format!("no convergence after {iters} iterations"));
            break;
        }
        basis.clear();
        basis.push(tmp.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut cols = 0;
        let mut broke_down = false;
        for j in 0..m {
            apply(&basis[j], &mut tmp2);
            precondition(&tmp2, &mut tmp, &mut precond);
            iters += 1;
            let w0 = norm(&tmp);
            for i in 0..=j {
                let hij = dot(&tmp, &basis[i]);
                hess[i][j] = hij;
                for (t, b) in tmp.iter_mut().zip(&basis[i]) {
                    *t -= hij * b;
                }
            }
            let wn = norm(&tmp);
            hess[j + 1][j] = wn;
            for i in 0..j {
                let (a, b) = (hess[i][j], hess[i + 1][j]);
                hess[i][j] = cs[i] * a + sn[i] * b;
                hess[i + 1][j] = -sn[i] * a + cs[i] * b;
            }
            let (a, b) = (hess[j][j], hess[j + 1][j]);
            let rho = a.hypot(b);
            if rho == 0.0 {
                cols = j;
                broke_down = true;
                break;
            }
            cs[j] = a / rho;
            sn[j] = b / rho;
            hess[j][j] = rho;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            cols = j + 1;
            if wn <= f64::EPSILON * w0.max(f64::MIN_POSITIVE) {
                broke_down = true;
                break;
            }
            if g[j + 1].abs() <= target || iters >= cfg.max_iter {
                break;
            }
            basis.push(tmp.iter().map(|v| v / wn).collect());
        }
        // back substitution
        let mut y = vec![0.0; cols];
        for i in (0..cols).rev() {
            let mut s = g[i];
            for l in i + 1..cols {
                s -= hess[i][l] * y[l];
            }
            y[i] = s / hess[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            for (xk, vk) in x.iter_mut().zip(v) {
                *xk += yi * vk;
            }
        }
        true_residual(&mut apply, &x, &mut r);
        precondition(&r, &mut tmp, &mut precond);
        beta = norm(&tmp);
        if broke_down {
            if beta > target {
                diagnostic = Some(format!("Arnoldi breakdown after {iters} iterations"));
            }
            break;
        }
    }
    true_residual(&mut apply, &x, &mut r);
    let rel_residual = norm(&r) / r0_norm;
    let converged = beta <= target;
    if converged {
        diagnostic = None;
    }
    GmresOutcome { x, iters, converged, rel_residual, diagnostic }
}

/// Field-level GMRES: `apply` maps a field with filled ghosts to `A x`.
pub fn gmres_solve(
    apply: impl FnMut(&VectorField3, &mut VectorField3),
    rhs: &VectorField3,
    x0: Option<&VectorField3>,
    cfg: &GmresConfig,
) -> (VectorField3, GmresOutcome) {
    gmres_solve_preconditioned(apply, None, rhs, x0, cfg)
}

/// Field-level GMRES with an optional left preconditioner `z = P^{-1} r`.
pub fn gmres_solve_preconditioned(
    mut apply: impl FnMut(&VectorField3, &mut VectorField3),
    precond: Option<&mut dyn FnMut(&VectorField3, &mut VectorField3)>,
    rhs: &VectorField3,
    x0: Option<&VectorField3>,
    cfg: &GmresConfig,
) -> (VectorField3, GmresOutcome) {
    let grid = *rhs.grid();
    let mut xin = VectorField3::zeros(grid);
    let mut yout = VectorField3::zeros(grid);
    let b = rhs.pack();
    let x0 = x0.map(|f| f.pack());
    let outcome = match precond {
        Some(p) => {
            let mut pin = VectorField3::zeros(grid);
            let mut pout = VectorField3::zeros(grid);
            let mut flat = |v: &[f64], out: &mut [f64]| {
                pin.unpack(v);
                p(&pin, &mut pout);
                out.copy_from_slice(&pout.pack());
            };
            gmres(
                |v, out| {
                    xin.unpack(v);
                    apply(&xin, &mut yout);
                    out.copy_from_slice(&yout.pack());
                },
                Some(&mut flat),
                &b,
                x0.as_deref(),
                cfg,
            )
        }
        None => gmres(
            |v, out| {
                xin.unpack(v);
                apply(&xin, &mut yout);
                out.copy_from_slice(&yout.pack());
            },
            None,
            &b,
            x0.as_deref(),
            cfg,
        ),
    };
    let mut x = VectorField3::zeros(grid);
    x.unpack(&outcome.x);
    (x, outcome)
}

/// Dense scalar matrix of the Neumann Laplacian on the interior cells
/// (x-fastest ordering), with the mirrored ghosts folded into the diagonal.
pub fn dense_laplacian(grid: &GridSpec) -> Result<DMatrix<f64>, SolveError> {
    let cells = grid.cell_count();
    if cells > DENSE_CELL_LIMIT {
        return Err(SolveError::TooLarge { cells, limit: DENSE_CELL_LIMIT });
    }
    let n = grid.n();
    let h = grid.h();
    let mut a = DMatrix::zeros(cells, cells);
    let index = |i: usize, j: usize, k: usize| i + n[0] * (j + n[1] * k);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let row = index(i, j, k);
                let pos = [i, j, k];
                for ax in 0..grid.axes() {
                    let w = 1.0 / (h[ax] * h[ax]);
                    for step in [-1i64, 1] {
                        let p = pos[ax] as i64 + step;
                        if p < 0 || p >= n[ax] as i64 {
                            // ghost equals the cell itself: contributions cancel
                            continue;
                        }
                        let mut nb = pos;
                        nb[ax] = p as usize;
                        a[(row, index(nb[0], nb[1], nb[2]))] += w;
                        a[(row, row)] -= w;
                    }
                }
            }
        }
    }
    Ok(a)
}

/// Assembles `I - lambda * lap_h` densely and solves by LU, component by component.
pub fn dense_oracle_solve(grid: &GridSpec, lambda: f64, rhs: &VectorField3) -> Result<VectorField3, SolveError> {
    if !rhs.grid().same_shape(grid) {
        return Err(SolveError::GridMismatch);
    }
    let lap = dense_laplacian(grid)?;
    let cells = grid.cell_count();
    let system = DMatrix::<f64>::identity(cells, cells) - lap * lambda;
    let lu = system.lu();
    let mut out = VectorField3::zeros(*grid);
    let interior: Vec<usize> = grid.interior().collect();
    for q in 0..3 {
        let b = DVector::from_iterator(cells, interior.iter().map(|&c| rhs.data()[3 * c + q]));
        let x = lu.solve(&b).ok_or(SolveError::Singular)?;
        for (v, &c) in x.iter().zip(&interior) {
            out.data_mut()[3 * c + q] = *v;
        }
    }
    out.fill_ghosts();
    Ok(out)
}
