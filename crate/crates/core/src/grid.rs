//! Cell-centered grids with one ghost layer, the second-order stencils used by
//! the solver, and the discrete norms the convergence studies report.
//!
//! Fields are stored component-interleaved with x varying fastest. Every
//! active axis carries one ghost cell on each side; the ghost mirrors the
//! adjacent interior cell, which is the second-order homogeneous Neumann
//! condition at the cell face.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least one cell per axis, got {0:?}")]
    EmptyAxis([usize; 3]),
    #[error("extent along axis {axis} must be positive and finite, got {value}")]
    BadExtent { axis: usize, value: f64 },
    #[error("fields live on different grids")]
    Mismatch,
    #[error("p-norm needs p >= 1, got {0}")]
    BadExponent(f64),
}

/// Spatial dimension of a grid. Two-dimensional domains are not supported;
/// thin films are three-dimensional grids with one cell across.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    One,
    Three,
}

impl Dim {
    pub fn axes(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Three => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: Dim,
    n: [usize; 3],
    h: [f64; 3],
    extent: [f64; 3],
}

impl GridSpec {
    pub fn new_1d(n: usize, extent: f64) -> Result<Self, GridError> {
        Self::build(Dim::One, [n, 1, 1], [extent, 1.0, 1.0])
    }

    pub fn new_3d(n: [usize; 3], extent: [f64; 3]) -> Result<Self, GridError> {
        Self::build(Dim::Three, n, extent)
    }

    /// `n` cells on the unit interval.
    pub fn unit_1d(n: usize) -> Result<Self, GridError> {
        Self::new_1d(n, 1.0)
    }

    /// `n` cells per axis on the unit cube.
    pub fn unit_cube(n: usize) -> Result<Self, GridError> {
        Self::new_3d([n; 3], [1.0; 3])
    }

    fn build(dim: Dim, n: [usize; 3], extent: [f64; 3]) -> Result<Self, GridError> {
        if n.iter().any(|&c| c == 0) {
            return Err(GridError::EmptyAxis(n));
        }
        for (axis, &value) in extent.iter().enumerate().take(dim.axes()) {
            if !(value.is_finite() && value > 0.0) {
                return Err(GridError::BadExtent { axis, value });
            }
        }
        let mut h = [1.0; 3];
        for a in 0..dim.axes() {
            h[a] = extent[a] / n[a] as f64;
        }
        Ok(Self { dim, n, h, extent })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Number of active axes (1 or 3).
    pub fn axes(&self) -> usize {
        self.dim.axes()
    }

    /// Interior cell counts. Inactive axes report 1.
    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn h(&self) -> [f64; 3] {
        self.h
    }

    pub fn extent(&self) -> [f64; 3] {
        self.extent
    }

    pub fn cell_count(&self) -> usize {
        self.n.iter().product()
    }

    /// Quadrature weight h^d of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h[..self.axes()].iter().product()
    }

    /// Total measure of the domain.
    pub fn volume(&self) -> f64 {
        self.extent[..self.axes()].iter().product()
    }

    /// Allocated extent per axis including ghosts.
    pub fn padded(&self) -> [usize; 3] {
        let mut p = [1; 3];
        for a in 0..3 {
            p[a] = if a < self.axes() { self.n[a] + 2 } else { 1 };
        }
        p
    }

    pub fn padded_len(&self) -> usize {
        self.padded().iter().product()
    }

    /// Stride (in cells) of one step along each axis in the padded layout.
    /// Inactive axes get stride 0 so stencils along them read the center.
    pub fn strides(&self) -> [usize; 3] {
        let p = self.padded();
        let mut s = [1, p[0], p[0] * p[1]];
        for a in self.axes()..3 {
            s[a] = 0;
        }
        s
    }

    /// Padded cell index of interior cell `(i, j, k)` (zero-based).
    #[inline]
    pub fn cell(&self, i: usize, j: usize, k: usize) -> usize {
        let p = self.padded();
        match self.dim {
            Dim::One => i + 1,
            Dim::Three => (i + 1) + p[0] * ((j + 1) + p[1] * (k + 1)),
        }
    }

    /// Padded indices of all interior cells, x fastest.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        let [nx, ny, nz] = self.n;
        (0..nz).flat_map(move |k| (0..ny).flat_map(move |j| (0..nx).map(move |i| self.cell(i, j, k))))
    }

    /// Physical position of the center of interior cell `(i, j, k)`.
    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let idx = [i, j, k];
        for a in 0..self.axes() {
            x[a] = (idx[a] as f64 + 0.5) * self.h[a];
        }
        x
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.dim == other.dim && self.n == other.n && self.h == other.h
    }
}

/// Three-component field on a [`GridSpec`] with one ghost layer.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    grid: GridSpec,
    data: Vec<f64>,
}

impl VectorField3 {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![0.0; 3 * grid.padded_len()] }
    }

    /// Field sampled at cell centers, ghosts filled.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        let [nx, ny, nz] = grid.n();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let c = grid.cell(i, j, k);
                    out.set(c, f(grid.center(i, j, k)));
                }
            }
        }
        out.fill_ghosts();
        out
    }

    /// Same value in every cell, ghosts included.
    pub fn uniform(grid: GridSpec, v: [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for cell in out.data.chunks_exact_mut(3) {
            cell.copy_from_slice(&v);
        }
        out
    }

    /// Builds a field from interior values in x-fastest order.
    pub fn from_interior(grid: GridSpec, values: &[[f64; 3]]) -> Option<Self> {
        if values.len() != grid.cell_count() {
            return None;
        }
        let mut out = Self::zeros(grid);
        for (c, v) in grid.interior().zip(values) {
            out.set(c, *v);
        }
        out.fill_ghosts();
        Some(out)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, cell: usize) -> [f64; 3] {
        let b = 3 * cell;
        [self.data[b], self.data[b + 1], self.data[b + 2]]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, v: [f64; 3]) {
        let b = 3 * cell;
        self.data[b..b + 3].copy_from_slice(&v);
    }

    /// Interior values in x-fastest order.
    pub fn interior_values(&self) -> Vec<[f64; 3]> {
        self.grid.interior().map(|c| self.get(c)).collect()
    }

    /// Packs interior values into a flat component-interleaved vector.
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.grid.cell_count());
        for c in self.grid.interior() {
            out.extend_from_slice(&self.get(c));
        }
        out
    }

    /// Inverse of [`pack`](Self::pack); ghosts are filled afterwards.
    pub fn unpack(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), 3 * self.grid.cell_count(), "packed length mismatch");
        let grid = self.grid;
        for (c, v) in grid.interior().zip(flat.chunks_exact(3)) {
            self.set(c, [v[0], v[1], v[2]]);
        }
        self.fill_ghosts();
    }

    /// Copies each face-adjacent interior cell into its ghost.
    pub fn fill_ghosts(&mut self) {
        let p = self.grid.padded();
        let n = self.grid.n();
        let axes = self.grid.axes();
        let (px, py) = (p[0], p[1]);
        let idx = |i: usize, j: usize, k: usize| i + px * (j + py * k);
        let copy = |data: &mut [f64], dst: usize, src: usize| {
            data.copy_within(3 * src..3 * src + 3, 3 * dst);
        };
        // x faces
        for k in 0..p[2] {
            for j in 0..p[1] {
                copy(&mut self.data, idx(0, j, k), idx(1, j, k));
                copy(&mut self.data, idx(n[0] + 1, j, k), idx(n[0], j, k));
            }
        }
        if axes == 3 {
            for k in 0..p[2] {
                for i in 0..p[0] {
                    copy(&mut self.data, idx(i, 0, k), idx(i, 1, k));
                    copy(&mut self.data, idx(i, n[1] + 1, k), idx(i, n[1], k));
                }
            }
            for j in 0..p[1] {
                for i in 0..p[0] {
                    copy(&mut self.data, idx(i, j, 0), idx(i, j, 1));
                    copy(&mut self.data, idx(i, j, n[2] + 1), idx(i, j, n[2]));
                }
            }
        }
    }

    /// `self += a * other` over the whole allocation.
    pub fn axpy(&mut self, a: f64, other: &VectorField3) {
        debug_assert!(self.grid.same_shape(&other.grid));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.data {
            *x *= a;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Arithmetic mean of the interior values.
    pub fn mean(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for c in self.grid.interior() {
            let v = self.get(c);
            for q in 0..3 {
                s[q] += v[q];
            }
        }
        let n = self.grid.cell_count() as f64;
        [s[0] / n, s[1] / n, s[2] / n]
    }
}

/// Nine values per interior cell: row = derivative direction, column = component.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![0.0; 9 * grid.cell_count()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Entry `(axis, comp)` of interior cell `idx` (x-fastest interior numbering).
    #[inline]
    pub fn get(&self, idx: usize, axis: usize, comp: usize) -> f64 {
        self.data[9 * idx + 3 * axis + comp]
    }

    pub fn cell(&self, idx: usize) -> &[f64] {
        &self.data[9 * idx..9 * idx + 9]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Squared Frobenius norm per interior cell.
    pub fn squared_magnitudes(&self) -> Vec<f64> {
        self.data.chunks_exact(9).map(|c| c.iter().map(|x| x * x).sum()).collect()
    }
}

pub fn check_same_grid(a: &VectorField3, b: &VectorField3) -> Result<(), GridError> {
    if a.grid.same_shape(&b.grid) {
        Ok(())
    } else {
        Err(GridError::Mismatch)
    }
}

/// Centered second difference summed over active axes. Ghosts must be filled.
pub fn laplacian(f: &VectorField3) -> VectorField3 {
    let mut out = VectorField3::zeros(f.grid);
    laplacian_into(f, &mut out);
    out
}

/// As [`laplacian`], writing interior cells of `out` and leaving its ghosts filled.
pub fn laplacian_into(f: &VectorField3, out: &mut VectorField3) {
    let g = f.grid;
    let s = g.strides();
    let h = g.h();
    let axes = g.axes();
    let inv: Vec<f64> = (0..axes).map(|a| 1.0 / (h[a] * h[a])).collect();
    let src = &f.data;
    for c in g.interior() {
        for q in 0..3 {
            let center = src[3 * c + q];
            let mut acc = 0.0;
            for a in 0..axes {
                let lo = src[3 * (c - s[a]) + q];
                let hi = src[3 * (c + s[a]) + q];
                acc += (hi - 2.0 * center + lo) * inv[a];
            }
            out.data[3 * c + q] = acc;
        }
    }
    out.fill_ghosts();
}

/// Centered gradient `(f[+1] - f[-1]) / 2h` per axis and component.
pub fn gradient(f: &VectorField3) -> TensorField {
    let g = f.grid;
    let s = g.strides();
    let h = g.h();
    let mut out = TensorField::zeros(g);
    for (idx, c) in g.interior().enumerate() {
        for a in 0..g.axes() {
            for q in 0..3 {
                let d = f.data[3 * (c + s[a]) + q] - f.data[3 * (c - s[a]) + q];
                out.data[9 * idx + 3 * a + q] = d / (2.0 * h[a]);
            }
        }
    }
    out
}

/// Forward difference `(f[+1] - f) / h` on the upper face of each cell.
///
/// With mirrored ghosts the outermost face carries zero flux, which makes
/// `<-lap f, g> == <face_gradient f, face_gradient g>` hold exactly.
pub fn face_gradient(f: &VectorField3) -> TensorField {
    let g = f.grid;
    let s = g.strides();
    let h = g.h();
    let mut out = TensorField::zeros(g);
    for (idx, c) in g.interior().enumerate() {
        for a in 0..g.axes() {
            for q in 0..3 {
                let d = f.data[3 * (c + s[a]) + q] - f.data[3 * c + q];
                out.data[9 * idx + 3 * a + q] = d / h[a];
            }
        }
    }
    out
}

/// Averages component `a` with its lower neighbour along axis `a`
/// (u along x, v along y, w along z). Components without an active axis are
/// copied. Ghosts of the result are refilled by the mirror rule.
pub fn face_average(f: &VectorField3) -> VectorField3 {
    let g = f.grid;
    let s = g.strides();
    let mut out = f.clone();
    for c in g.interior() {
        for q in 0..g.axes() {
            out.data[3 * c + q] = 0.5 * (f.data[3 * c + q] + f.data[3 * (c - s[q]) + q]);
        }
    }
    out.fill_ghosts();
    out
}

/// Averaged gradient: the centered gradient of [`face_average`].
pub fn avg_gradient(f: &VectorField3) -> TensorField {
    gradient(&face_average(f))
}

/// `h^d * sum f . g` over interior cells.
pub fn inner_product(f: &VectorField3, g: &VectorField3) -> Result<f64, GridError> {
    check_same_grid(f, g)?;
    let mut acc = 0.0;
    for c in f.grid.interior() {
        let (a, b) = (f.get(c), g.get(c));
        acc += a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    }
    Ok(acc * f.grid.cell_volume())
}

/// `h^d * sum` of the per-cell Frobenius products of two tensor fields.
pub fn tensor_inner_product(a: &TensorField, b: &TensorField) -> Result<f64, GridError> {
    if !a.grid.same_shape(&b.grid) {
        return Err(GridError::Mismatch);
    }
    let acc: f64 = a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum();
    Ok(acc * a.grid.cell_volume())
}

/// Discrete norms of a field. `h1` uses the centered gradient, `h1_face` the
/// face-difference gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub linf: f64,
    pub l2: f64,
    pub h1: f64,
    pub h1_face: f64,
}

/// Largest absolute component over interior cells.
pub fn linf_norm(f: &VectorField3) -> f64 {
    f.grid
        .interior()
        .flat_map(|c| f.get(c))
        .fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// `(h^d * sum |f_I|^p)^(1/p)` with `|f_I|` the Euclidean length in each cell.
pub fn lp_norm(f: &VectorField3, p: f64) -> Result<f64, GridError> {
    if !(p >= 1.0) {
        return Err(GridError::BadExponent(p));
    }
    let mut acc = 0.0;
    for c in f.grid.interior() {
        let v = f.get(c);
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        acc += len.powf(p);
    }
    Ok((acc * f.grid.cell_volume()).powf(1.0 / p))
}

pub fn l2_norm(f: &VectorField3) -> f64 {
    let mut acc = 0.0;
    for c in f.grid.interior() {
        let v = f.get(c);
        acc += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    }
    (acc * f.grid.cell_volume()).sqrt()
}

/// `h^d * sum |T|^2`.
pub fn tensor_norm_sq(t: &TensorField) -> f64 {
    t.data.iter().map(|x| x * x).sum::<f64>() * t.grid.cell_volume()
}

/// All norms of `f`; ghosts must be filled.
pub fn norms(f: &VectorField3) -> Norms {
    let l2 = l2_norm(f);
    let l2sq = l2 * l2;
    Norms {
        linf: linf_norm(f),
        l2,
        h1: (l2sq + tensor_norm_sq(&gradient(f))).sqrt(),
        h1_face: (l2sq + tensor_norm_sq(&face_gradient(f))).sqrt(),
    }
}

/// `a - b` with ghosts refilled.
pub fn difference(a: &VectorField3, b: &VectorField3) -> VectorField3 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.fill_ghosts();
    d
}
