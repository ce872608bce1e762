//! Smooth unit-length test solution with closed-form derivatives.
//!
//! `m_e = (cos(phi) sin t, sin(phi) sin t, cos t)` where
//! `phi = X` in 1-D and `phi = X Y Z` in 3-D with `X = x^2 (1 - x)^2`.

use crate::grid::Dim;
use crate::physics::cross;

/// `X(x) = x^2 (1-x)^2` and its first two derivatives.
fn bump(x: f64) -> (f64, f64, f64) {
    let v = x * x * (1.0 - x) * (1.0 - x);
    let d1 = 2.0 * x - 6.0 * x * x + 4.0 * x * x * x;
    let d2 = 2.0 - 12.0 * x + 12.0 * x * x;
    (v, d1, d2)
}

/// Exact values at one point and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSample {
    pub m: [f64; 3],
    pub dt: [f64; 3],
    pub lap: [f64; 3],
    /// `grad[axis][component]`.
    pub grad: [[f64; 3]; 3],
    /// `|grad m|^2`.
    pub grad_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedProblem {
    pub dim: Dim,
    pub alpha: f64,
}

impl ManufacturedProblem {
    pub fn new(dim: Dim, alpha: f64) -> Self {
        Self { dim, alpha }
    }

    /// Phase `phi`, its gradient and its Laplacian.
    fn phase(&self, x: [f64; 3]) -> (f64, [f64; 3], f64) {
        match self.dim {
            Dim::One => {
                let (v, d1, d2) = bump(x[0]);
                (v, [d1, 0.0, 0.0], d2)
            }
            Dim::Three => {
                let (a, a1, a2) = bump(x[0]);
                let (b, b1, b2) = bump(x[1]);
                let (c, c1, c2) = bump(x[2]);
                (a * b * c, [a1 * b * c, a * b1 * c, a * b * c1], a2 * b * c + a * b2 * c + a * b * c2)
            }
        }
    }

    pub fn sample(&self, x: [f64; 3], t: f64) -> ExactSample {
        let (phi, g, lphi) = self.phase(x);
        let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = t.sin_cos();
        ExactSample {
            m: [cp * st, sp * st, ct],
            dt: [cp * ct, sp * ct, -st],
            lap: [(-cp * g2 - sp * lphi) * st, (-sp * g2 + cp * lphi) * st, 0.0],
            grad: g.map(|ga| [-sp * ga * st, cp * ga * st, 0.0]),
            grad_sq: g2 * st * st,
        }
    }

    pub fn exact(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        self.sample(x, t).m
    }

    /// Forcing that makes `m_e` an exact solution of
    /// `m_t = alpha lap m + alpha |grad m|^2 m - m x lap m + f_e`
    /// (unit exchange, no lower-order field).
    pub fn forcing(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let s = self.sample(x, t);
        let p = cross(s.m, s.lap);
        let a = self.alpha;
        [0, 1, 2].map(|q| s.dt[q] - a * s.lap[q] - a * s.grad_sq * s.m[q] + p[q])
    }

    /// Forcing for the damping-only model
    /// `m_t = -alpha m x (m x lap m) + g = alpha lap m + alpha |grad m|^2 m + g`.
    pub fn damping_only_forcing(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let s = self.sample(x, t);
        let a = self.alpha;
        [0, 1, 2].map(|q| s.dt[q] - a * s.lap[q] - a * s.grad_sq * s.m[q])
    }
}
