//! Hand-written reference computations shared by the oracle suites and the
//! acceptance run.

use llimex::grid::{self, GridSpec, VectorField3};
use llimex::linsolve::HelmholtzPlan;
use llimex::physics::demag::{newell_tensor, XX, XY, XZ, YY, YZ, ZZ};
use llimex::physics::{FieldTerms, Forcing, LlModel, MaterialParams, RhsForm};
use llimex::steppers::{builtin_tableau, imex_step, DiffusionSolver, SchemeId, StepError};

use super::{cells, max_abs_diff, random_unit_field};

pub fn apply(n: [f64; 6], m: [f64; 3]) -> [f64; 3] {
    [
        n[XX] * m[0] + n[XY] * m[1] + n[XZ] * m[2],
        n[XY] * m[0] + n[YY] * m[1] + n[YZ] * m[2],
        n[XZ] * m[0] + n[YZ] * m[1] + n[ZZ] * m[2],
    ]
}

/// `h_i = -sum_j N(r_i - r_j) m_j` by explicit summation over all pairs.
pub fn direct_sum(grid: &GridSpec, m: &VectorField3) -> Vec<[f64; 3]> {
    let [nx, ny, nz] = grid.n();
    let h = grid.h();
    let pos: Vec<[usize; 3]> = (0..nz).flat_map(|k| (0..ny).flat_map(move |j| (0..nx).map(move |i| [i, j, k]))).collect();
    let vals = cells(m);
    pos.iter()
        .map(|pi| {
            let mut acc = [0.0; 3];
            for (pj, mj) in pos.iter().zip(&vals) {
                let r = [0, 1, 2].map(|a| (pi[a] as f64 - pj[a] as f64) * h[a]);
                let f = apply(newell_tensor(r, h), *mj);
                for q in 0..3 {
                    acc[q] -= f[q];
                }
            }
            acc
        })
        .collect()
}

pub fn forced_model(g: GridSpec, beta: f64, forced: bool) -> LlModel {
    let mut terms = FieldTerms::micromagnetic([0.05, 0.0, -0.02]);
    terms.demag = false;
    if forced {
        terms = terms.with_forcing(Forcing::new(|t, x| [(3.0 * t).sin() * x[0], 0.2 * (t + x[1]).cos(), 0.1 * t]));
    }
    LlModel::new(g, MaterialParams::dimensionless(0.3, 0.4, 0.2, beta), terms, RhsForm::CrossProduct).unwrap()
}

/// Left-hand solve `(I - a k beta lap) x = rhs` through a fresh plan.
pub fn solve(g: GridSpec, a: f64, rhs: &VectorField3) -> VectorField3 {
    HelmholtzPlan::new(g, a).unwrap().solve(rhs).unwrap()
}

/// `m + sum c_i v_i`.
pub fn comb(m: &VectorField3, terms: &[(f64, &VectorField3)]) -> VectorField3 {
    let mut out = m.clone();
    for (c, v) in terms {
        out.axpy(*c, v);
    }
    out.fill_ghosts();
    out
}

pub fn run_library(id: SchemeId, md: &LlModel, m: &VectorField3, t: f64, k: f64) -> VectorField3 {
    let mut diff = DiffusionSolver::new(*md.grid(), md.params.beta);
    let mut n = |s: f64, v: &VectorField3| md.explicit_part(s, v).map_err(StepError::from);
    imex_step(&builtin_tableau(id).unwrap(), m, t, k, &mut diff, &mut n).unwrap()
}

/// Largest difference relative to the largest entry of `want`.
pub fn rel_diff(got: &VectorField3, want: &VectorField3) -> f64 {
    let (a, b) = (cells(got), cells(want));
    let scale = b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    max_abs_diff(&a, &b) / scale
}

pub fn check(got: &VectorField3, want: &VectorField3) {
    let d = rel_diff(got, want);
    assert!(d <= 1e-14, "{d}");
}

/// Library step and hand-written marching for IMEX-RK2, from the same state.
pub fn rk2_pair(g: GridSpec, seed: u64) -> (VectorField3, VectorField3) {
    let (beta, k, t) = (2.0, 0.01, 0.3);
    let md = forced_model(g, beta, true);
    let m = random_unit_field(g, seed);
    let n = |s: f64, v: &VectorField3| md.explicit_part(s, v).unwrap();
    let l = |v: &VectorField3| {
        let mut o = grid::laplacian(v);
        o.scale(beta);
        o
    };
    let m2 = solve(g, 0.5 * k * beta, &comb(&m, &[(0.5 * k, &n(t, &m))]));
    let n2 = n(t + 0.5 * k, &m2);
    let m3 = solve(g, 0.5 * k * beta, &comb(&m, &[(0.5 * k, &l(&m)), (k, &n2)]));
    let want = comb(&m, &[(0.5 * k, &l(&m)), (0.5 * k, &l(&m3)), (k, &n2)]);
    (run_library(SchemeId::ImexRk2, &md, &m, t, k), want)
}

pub fn rk3_pair(g: GridSpec, seed: u64) -> (VectorField3, VectorField3) {
    let (beta, k, t) = (1.5, 2e-3, 0.1);
    let md = forced_model(g, beta, true);
    let m = random_unit_field(g, seed);
    let n = |s: f64, v: &VectorField3| md.explicit_part(s, v).unwrap();
    let l = |v: &VectorField3| {
        let mut o = grid::laplacian(v);
        o.scale(beta);
        o
    };
    let h = 0.5 * k * beta;
    let n1 = n(t, &m);
    let m2 = solve(g, h, &comb(&m, &[(0.5 * k, &n1)]));
    let (l2, n2) = (l(&m2), n(t + k / 2.0, &m2));
    let m3 = solve(g, h, &comb(&m, &[(k / 6.0, &l2), (11.0 * k / 18.0, &n1), (k / 18.0, &n2)]));
    let (l3, n3) = (l(&m3), n(t + 2.0 * k / 3.0, &m3));
    let m4 = solve(g, h, &comb(&m, &[(-k / 2.0, &l2), (k / 2.0, &l3), (5.0 * k / 6.0, &n1), (-5.0 * k / 6.0, &n2), (k / 2.0, &n3)]));
    let (l4, n4) = (l(&m4), n(t + k / 2.0, &m4));
    let m5 = solve(
        g,
        h,
        &comb(&m, &[(1.5 * k, &l2), (-1.5 * k, &l3), (k / 2.0, &l4), (k / 4.0, &n1), (1.75 * k, &n2), (0.75 * k, &n3), (-1.75 * k, &n4)]),
    );
    let want = comb(
        &m,
        &[(1.5 * k, &l2), (-1.5 * k, &l3), (k / 2.0, &l4), (k / 2.0, &l(&m5)), (k / 4.0, &n1), (1.75 * k, &n2), (0.75 * k, &n3), (-1.75 * k, &n4)],
    );
    (run_library(SchemeId::ImexRk3, &md, &m, t, k), want)
}

/// SSP-IMEX-RK2 with an autonomous explicit part.
pub fn ssp_pair(g: GridSpec, seed: u64) -> (VectorField3, VectorField3) {
    let (beta, k) = (3.0, 5e-3);
    let md = forced_model(g, beta, false);
    let m = random_unit_field(g, seed);
    let n = |v: &VectorField3| md.explicit_part(0.0, v).unwrap();
    let l = |v: &VectorField3| {
        let mut o = grid::laplacian(v);
        o.scale(beta);
        o
    };
    let q = 0.25 * k * beta;
    let m2 = solve(g, q, &m);
    let n2 = n(&m2);
    let m3 = solve(g, q, &comb(&m, &[(k / 2.0, &n2)]));
    let n3 = n(&m3);
    let (l2, l3) = (l(&m2), l(&m3));
    let m4 = solve(g, k * beta / 3.0, &comb(&m, &[(k / 2.0, &n2), (k / 2.0, &n3), (k / 3.0, &l2), (k / 3.0, &l3)]));
    let want = comb(&m, &[(k / 3.0, &n2), (k / 3.0, &n3), (k / 3.0, &n(&m4)), (k / 3.0, &l2), (k / 3.0, &l3), (k / 3.0, &l(&m4))]);
    (run_library(SchemeId::SspImexRk2, &md, &m, 0.0, k), want)
}
