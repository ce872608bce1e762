//! Stray field of a cell-wise uniform magnetization.
//!
//! The interaction between two rectangular cells is the cell-averaged Newell
//! tensor. The field is the discrete convolution of that tensor with `m`,
//! evaluated with a zero-padded FFT (padding doubles every axis with more
//! than one cell, so the circular convolution equals the open-boundary one).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Dim, GridSpec, VectorField3};

use super::PhysicsError;

/// Index order of the six independent tensor entries.
pub const XX: usize = 0;
pub const YY: usize = 1;
pub const ZZ: usize = 2;
pub const XY: usize = 3;
pub const XZ: usize = 4;
pub const YZ: usize = 5;

/// Beyond this many cell diagonals the point-dipole form replaces the Newell
/// expression, whose 27-term differences lose digits at long range.
const FAR_FIELD_CELLS: f64 = 40.0;

fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    let mut out = (2.0 * x2 - y2 - z2) * r / 6.0;
    if y > 0.0 && x2 + z2 > 0.0 {
        out += 0.5 * y * (z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    }
    if z > 0.0 && x2 + y2 > 0.0 {
        out += 0.5 * z * (y2 - x2) * (z / (x2 + y2).sqrt()).asinh();
    }
    if x > 0.0 && y > 0.0 && z > 0.0 {
        out -= x * y * z * (y * z / (x * r)).atan();
    }
    out
}

fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    let sign = x.signum() * y.signum();
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut out = -x * y * r / 3.0;
    if z > 0.0 {
        out += x * y * z * (z / (x2 + y2).sqrt()).asinh();
        out -= z * z2 / 6.0 * (x * y / (z * r)).atan();
        out -= 0.5 * z * y2 * (x * z / (y * r)).atan();
        out -= 0.5 * z * x2 * (y * z / (x * r)).atan();
    }
    out += y / 6.0 * (3.0 * z2 - y2) * (x / (y2 + z2).sqrt()).asinh();
    out += x / 6.0 * (3.0 * z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    sign * out
}

const STENCIL: [(f64, f64); 3] = [(-1.0, -1.0), (0.0, 2.0), (1.0, -1.0)];

fn second_difference(func: fn(f64, f64, f64) -> f64, r: [f64; 3], d: [f64; 3]) -> f64 {
    let mut acc = 0.0;
    for (sx, wx) in STENCIL {
        for (sy, wy) in STENCIL {
            for (sz, wz) in STENCIL {
                acc += wx * wy * wz * func(r[0] + sx * d[0], r[1] + sy * d[1], r[2] + sz * d[2]);
            }
        }
    }
    acc / (4.0 * PI * d[0] * d[1] * d[2])
}

fn dipole(r: [f64; 3], d: [f64; 3]) -> [f64; 6] {
    let vol = d[0] * d[1] * d[2];
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let r5 = r2 * r2 * r2.sqrt();
    let c = vol / (4.0 * PI * r5);
    [
        c * (r2 - 3.0 * r[0] * r[0]),
        c * (r2 - 3.0 * r[1] * r[1]),
        c * (r2 - 3.0 * r[2] * r[2]),
        -3.0 * c * r[0] * r[1],
        -3.0 * c * r[0] * r[2],
        -3.0 * c * r[1] * r[2],
    ]
}

/// Cell-averaged demagnetizing tensor between two cells of size `d` whose
/// centers are separated by `r`, in the order xx, yy, zz, xy, xz, yz.
/// The field of the source cell averaged over the target is `-N m`.
pub fn newell_tensor(r: [f64; 3], d: [f64; 3]) -> [f64; 6] {
    let reach = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() * FAR_FIELD_CELLS;
    let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if dist > reach {
        return dipole(r, d);
    }
    newell_tensor_exact(r, d)
}

/// Newell expression without the far-field switch.
pub fn newell_tensor_exact(r: [f64; 3], d: [f64; 3]) -> [f64; 6] {
    let [x, y, z] = r;
    let [dx, dy, dz] = d;
    [
        second_difference(newell_f, [x, y, z], [dx, dy, dz]),
        second_difference(newell_f, [y, x, z], [dy, dx, dz]),
        second_difference(newell_f, [z, y, x], [dz, dy, dx]),
        second_difference(newell_g, [x, y, z], [dx, dy, dz]),
        second_difference(newell_g, [x, z, y], [dx, dz, dy]),
        second_difference(newell_g, [y, z, x], [dy, dz, dx]),
    ]
}

/// Padded-spectrum demag kernel for one grid.
#[derive(Clone)]
pub struct DemagTensor {
    grid: GridSpec,
    padded: [usize; 3],
    /// Six real spectra (xx, yy, zz, xy, xz, yz), x-fastest mode order.
    spectra: [Vec<f64>; 6],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl fmt::Debug for DemagTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DemagTensor").field("grid", &self.grid).field("padded", &self.padded).finish_non_exhaustive()
    }
}

impl DemagTensor {
    pub fn build(grid: &GridSpec) -> Result<Self, PhysicsError> {
        if grid.dim() != Dim::Three {
            return Err(PhysicsError::DemagNeeds3d);
        }
        let n = grid.n();
        let d = grid.h();
        let padded = n.map(|c| if c > 1 { 2 * c } else { 1 });
        let total: usize = padded.iter().product();
        let mut planner = FftPlanner::new();
        let forward = [0, 1, 2].map(|a| planner.plan_fft_forward(padded[a]));
        let inverse = [0, 1, 2].map(|a| planner.plan_fft_inverse(padded[a]));

        let mut raw: [Vec<Complex<f64>>; 6] = std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); total]);
        let offset = |p: usize, a: usize| -> Option<i64> {
            let (np, nc) = (padded[a] as i64, n[a] as i64);
            let p = p as i64;
            if p < nc {
                Some(p)
            } else if p > np - nc {
                Some(p - np)
            } else {
                None
            }
        };
        for pz in 0..padded[2] {
            let Some(oz) = offset(pz, 2) else { continue };
            for py in 0..padded[1] {
                let Some(oy) = offset(py, 1) else { continue };
                for px in 0..padded[0] {
                    let Some(ox) = offset(px, 0) else { continue };
                    let r = [ox as f64 * d[0], oy as f64 * d[1], oz as f64 * d[2]];
                    let t = newell_tensor(r, d);
                    let idx = px + padded[0] * (py + padded[1] * pz);
                    for c in 0..6 {
                        raw[c][idx] = Complex::new(t[c], 0.0);
                    }
                }
            }
        }
        let mut tensor = Self {
            grid: *grid,
            padded,
            spectra: std::array::from_fn(|_| Vec::new()),
            forward,
            inverse,
        };
        for (c, buf) in raw.iter_mut().enumerate() {
            tensor.transform(buf, true);
            tensor.spectra[c] = buf.iter().map(|z| z.re).collect();
        }
        Ok(tensor)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn padded(&self) -> [usize; 3] {
        self.padded
    }

    /// Spectrum of one tensor entry (see the `XX`..`YZ` constants).
    pub fn spectrum(&self, entry: usize) -> &[f64] {
        &self.spectra[entry]
    }

    fn transform(&self, buf: &mut [Complex<f64>], forward: bool) {
        let p = self.padded;
        let plans = if forward { &self.forward } else { &self.inverse };
        let scratch_len = plans.iter().map(|f| f.get_inplace_scratch_len()).max().unwrap_or(0);
        let mut scratch = vec![Complex::new(0.0, 0.0); scratch_len];
        if p[0] > 1 {
            plans[0].process_with_scratch(buf, &mut scratch);
        }
        for (axis, stride) in [(1usize, p[0]), (2usize, p[0] * p[1])] {
            let len = p[axis];
            if len == 1 {
                continue;
            }
            let mut line = vec![Complex::new(0.0, 0.0); len];
            for base in 0..buf.len() {
                let coord = (base / stride) % len;
                if coord != 0 {
                    continue;
                }
                for (q, v) in line.iter_mut().enumerate() {
                    *v = buf[base + q * stride];
                }
                plans[axis].process_with_scratch(&mut line, &mut scratch);
                for (q, v) in line.iter().enumerate() {
                    buf[base + q * stride] = *v;
                }
            }
        }
    }

    /// `h_s = -N * m`; ghosts of the result are filled.
    pub fn stray_field(&self, m: &VectorField3) -> Result<VectorField3, PhysicsError> {
        if !m.grid().same_shape(&self.grid) {
            return Err(PhysicsError::GridMismatch);
        }
        let p = self.padded;
        let total: usize = p.iter().product();
        let n = self.grid.n();
        let mut bufs: [Vec<Complex<f64>>; 3] = std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); total]);
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let v = m.get(self.grid.cell(i, j, k));
                    let idx = i + p[0] * (j + p[1] * k);
                    for q in 0..3 {
                        bufs[q][idx] = Complex::new(v[q], 0.0);
                    }
                }
            }
        }
        for b in bufs.iter_mut() {
            self.transform(b, true);
        }
        let s = &self.spectra;
        for idx in 0..total {
            let (mx, my, mz) = (bufs[0][idx], bufs[1][idx], bufs[2][idx]);
            bufs[0][idx] = -(mx * s[XX][idx] + my * s[XY][idx] + mz * s[XZ][idx]);
            bufs[1][idx] = -(mx * s[XY][idx] + my * s[YY][idx] + mz * s[YZ][idx]);
            bufs[2][idx] = -(mx * s[XZ][idx] + my * s[YZ][idx] + mz * s[ZZ][idx]);
        }
        for b in bufs.iter_mut() {
            self.transform(b, false);
        }
        let norm = 1.0 / total as f64;
        let mut out = VectorField3::zeros(self.grid);
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let idx = i + p[0] * (j + p[1] * k);
                    out.set(self.grid.cell(i, j, k), [bufs[0][idx].re * norm, bufs[1][idx].re * norm, bufs[2][idx].re * norm]);
                }
            }
        }
        out.fill_ghosts();
        Ok(out)
    }
}
