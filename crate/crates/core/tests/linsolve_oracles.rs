mod common;

use common::{cells, dense_laplacian, max_abs_diff, random_field, random_unit_field};
use llimex::grid::{self, GridSpec, VectorField3};
use llimex::linsolve::{gmres, gmres_solve, helmholtz_solve, GmresConfig, HelmholtzPlan, ROUNDOFF_FLOOR};
use llimex::physics::cross;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dense(g: &GridSpec) -> DMatrix<f64> {
    let a = dense_laplacian(g.n(), g.h(), g.axes());
    let n = a.len();
    DMatrix::from_fn(n, n, |i, j| a[i][j])
}

#[test]
fn plan_spectrum_matches_dense_eigenvalues_on_6_cubed() {
    let g = GridSpec::unit_cube(6).unwrap();
    let mut want: Vec<f64> = dense(&g).symmetric_eigen().eigenvalues.iter().copied().collect();
    let mut got = HelmholtzPlan::new(g, 1.0).unwrap().spectrum();
    want.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
    }
}

#[test]
fn helmholtz_matches_dense_lu_on_8_cubed() {
    let g = GridSpec::unit_cube(8).unwrap();
    let lambda = 0.37;
    let b = random_field(g, 11);
    let lu = (DMatrix::identity(512, 512) - dense(&g) * lambda).lu();
    let rhs = cells(&b);
    let mut want = vec![[0.0; 3]; 512];
    for q in 0..3 {
        let x = lu.solve(&DVector::from_iterator(512, rhs.iter().map(|v| v[q]))).unwrap();
        for (w, v) in want.iter_mut().zip(x.iter()) {
            w[q] = *v;
        }
    }
    let got = cells(&helmholtz_solve(&HelmholtzPlan::new(g, lambda).unwrap(), &b).unwrap());
    let scale = want.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max_abs_diff(&got, &want) <= 1e-10 * scale);
}

#[test]
fn gmres_on_helmholtz_operator_agrees_with_transform_solve() {
    let g = GridSpec::new_3d([6, 5, 4], [1.0, 0.8, 0.6]).unwrap();
    let lambda = 0.02;
    let b = random_field(g, 12);
    let direct = HelmholtzPlan::new(g, lambda).unwrap().solve(&b).unwrap();
    let cfg = GmresConfig { restart: 40, max_iter: 2000, rel_tol: 1e-12 };
    let (x, out) = gmres_solve(
        |x, y| {
            let lap = grid::laplacian(x);
            *y = x.clone();
            y.axpy(-lambda, &lap);
        },
        &b,
        None,
        &cfg,
    );
    assert!(out.converged, "{out:?}");
    assert!(max_abs_diff(&cells(&x), &cells(&direct)) <= 1e-8);
}

/// `A x = 3/2 x + k (mh x eps lap x + alpha mh x (mh x eps lap x))`, the
/// implicit operator of a two-step backward difference step.
fn bdf2_apply(mh: &VectorField3, k: f64, eps: f64, alpha: f64, x: &VectorField3, y: &mut VectorField3) {
    let lap = grid::laplacian(x);
    *y = VectorField3::zeros(*x.grid());
    for c in x.grid().interior() {
        let (m, l, v) = (mh.get(c), lap.get(c).map(|t| eps * t), x.get(c));
        let p = cross(m, l);
        let d = cross(m, p);
        y.set(c, [0, 1, 2].map(|q| 1.5 * v[q] + k * (p[q] + alpha * d[q])));
    }
}

#[test]
fn gmres_solves_bdf2_operator_to_tolerance() {
    let g = GridSpec::unit_1d(64).unwrap();
    let mh = random_unit_field(g, 13);
    let b = random_field(g, 14);
    let (k, eps, alpha) = (1e-4, 1.0, 0.01);
    let cfg = GmresConfig::default();
    let (x, out) = gmres_solve(|x, y| bdf2_apply(&mh, k, eps, alpha, x, y), &b, None, &cfg);
    assert!(out.converged);
    let mut ax = VectorField3::zeros(g);
    bdf2_apply(&mh, k, eps, alpha, &x, &mut ax);
    let r = grid::difference(&b, &ax);
    let rel = grid::l2_norm(&r) / grid::l2_norm(&b);
    assert!(rel <= cfg.rel_tol * 1.0001, "{rel}");
    assert!(out.iters > 1 && out.iters < cfg.max_iter);
}

#[test]
fn warm_start_is_measured_against_its_own_residual() {
    // a symmetric positive definite tridiagonal system
    let n = 50;
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            y[i] = 4.0 * x[i] - if i > 0 { x[i - 1] } else { 0.0 } - if i + 1 < n { x[i + 1] } else { 0.0 };
        }
    };
    let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    let cfg = GmresConfig { restart: 10, max_iter: 200, rel_tol: 1e-6 };
    let cold = gmres(apply, None, &b, None, &cfg);
    let near: Vec<f64> = cold.x.iter().map(|v| v * (1.0 + 1e-7)).collect();
    let warm = gmres(apply, None, &b, Some(&near), &cfg);
    assert!(warm.converged);
    let mut r0 = vec![0.0; n];
    apply(&near, &mut r0);
    let r0: f64 = r0.iter().zip(&b).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let mut r = vec![0.0; n];
    apply(&warm.x, &mut r);
    let r: f64 = r.iter().zip(&b).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    // the warm start is already accurate to ~1e-7 relative, yet the solver still reduces it
    assert!(warm.iters >= 1);
    assert!(r <= (cfg.rel_tol * r0).max(ROUNDOFF_FLOOR * bnorm) * 1.01, "{r} vs {r0}");
}

proptest! {
    #[test]
    fn solve_then_apply_recovers_rhs(nx in 1usize..7, ny in 1usize..5, nz in 1usize..4, lambda in 0.0f64..2.0, seed in any::<u64>()) {
        let g = GridSpec::new_3d([nx, ny, nz], [1.0, 0.5, 0.25]).unwrap();
        let b = random_field(g, seed);
        let x = HelmholtzPlan::new(g, lambda).unwrap().solve(&b).unwrap();
        let mut back = x.clone();
        back.axpy(-lambda, &grid::laplacian(&x));
        let scale = 1.0 + lambda * 4.0 * (nx * nx) as f64 * 3.0;
        prop_assert!(max_abs_diff(&cells(&back), &cells(&b)) <= 1e-12 * scale);
    }

    #[test]
    fn solve_never_increases_l2(n in 1usize..40, lambda in 0.0f64..10.0, seed in any::<u64>()) {
        let g = GridSpec::unit_1d(n).unwrap();
        let b = random_field(g, seed);
        let x = HelmholtzPlan::new(g, lambda).unwrap().solve(&b).unwrap();
        prop_assert!(grid::l2_norm(&x) <= grid::l2_norm(&b) * (1.0 + 1e-12));
    }
}
