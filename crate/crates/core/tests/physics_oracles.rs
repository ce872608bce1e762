mod common;

use common::{cells, dense_laplacian, random_field, random_unit_field};
use llimex::grid::{self, GridSpec, VectorField3};
use llimex::physics::{cross, dot, normalize, FieldTerms, LlModel, MaterialParams, PhysicalConstants, RhsForm};
use proptest::prelude::*;

fn model(g: GridSpec, params: MaterialParams, terms: FieldTerms) -> LlModel {
    LlModel::new(g, params, terms, RhsForm::CrossProduct).unwrap()
}

#[test]
fn permalloy_reduced_numbers() {
    let p = PhysicalConstants::permalloy(1e-6);
    let q = 1.0e2 / (4.0e-7 * std::f64::consts::PI * 8.0e5 * 8.0e5);
    assert!((p.q() - q).abs() < 1e-18);
    assert!((p.q() - 1.2434e-4).abs() < 1e-8);
    assert!((p.reduced_field_from_mt(50.0) - 0.049736).abs() < 1e-6);
}

#[test]
fn effective_field_is_linear_without_zeeman() {
    let g = GridSpec::new_3d([4, 3, 2], [1.0, 0.8, 0.3]).unwrap();
    let mut terms = FieldTerms::micromagnetic([0.0; 3]);
    terms.zeeman = false;
    let m = model(g, MaterialParams::dimensionless(0.02, 0.3, 0.1, 0.0), terms);
    let (a, b) = (random_field(g, 1), random_field(g, 2));
    let mut comb = a.clone();
    comb.scale(1.7);
    comb.axpy(-0.4, &b);
    let mut want = m.effective_field(&a).unwrap();
    want.scale(1.7);
    want.axpy(-0.4, &m.effective_field(&b).unwrap());
    let got = m.effective_field(&comb).unwrap();
    assert!(common::max_abs_diff(&cells(&got), &cells(&want)) < 1e-12);
}

#[test]
fn torque_is_orthogonal_to_m_without_artificial_term() {
    let g = GridSpec::new_3d([4, 4, 2], [1.0, 1.0, 0.5]).unwrap();
    let m = model(g, MaterialParams::dimensionless(0.05, 0.2, 0.3, 0.0), FieldTerms::micromagnetic([0.1, -0.2, 0.05]));
    let v = random_field(g, 3);
    let n = m.rhs_full(0.0, &v).unwrap();
    for (a, b) in cells(&v).iter().zip(cells(&n)) {
        assert!(dot(*a, b).abs() < 1e-13);
    }
}

/// Cross-product right side from a dense Laplacian, no shared code paths.
fn straight_line_rhs(g: GridSpec, m: &VectorField3, p: MaterialParams, h_ext: [f64; 3]) -> Vec<[f64; 3]> {
    let lap = dense_laplacian(g.n(), g.h(), g.axes());
    let x = cells(m);
    let lx: Vec<[f64; 3]> = lap.iter().map(|row| [0, 1, 2].map(|q| row.iter().zip(&x).map(|(w, v)| w * v[q]).sum())).collect();
    x.iter()
        .zip(&lx)
        .map(|(v, l)| {
            let h = [p.eps * l[0] + h_ext[0], p.eps * l[1] - p.q * v[1] + h_ext[1], p.eps * l[2] - p.q * v[2] + h_ext[2]];
            let mh = cross(*v, h);
            let mmh = cross(*v, mh);
            [0, 1, 2].map(|q| -mh[q] - p.alpha * mmh[q] - p.beta * l[q])
        })
        .collect()
}

#[test]
fn rhs_full_matches_straight_line_formula() {
    for g in [GridSpec::unit_1d(11).unwrap(), GridSpec::new_3d([3, 4, 2], [1.0, 1.0, 0.6]).unwrap()] {
        let p = MaterialParams::dimensionless(0.7, 0.25, 0.05, 2.1);
        let he = [0.1, 0.0, -0.3];
        let mut terms = FieldTerms::micromagnetic(he);
        terms.demag = false;
        let m = random_unit_field(g, 4);
        let got = cells(&model(g, p, terms).rhs_full(0.0, &m).unwrap());
        let want = straight_line_rhs(g, &m, p, he);
        let scale = want.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(common::max_abs_diff(&got, &want) <= 1e-12 * scale);
    }
}

fn smooth_unit(n: usize) -> VectorField3 {
    // theta' vanishes at both ends, so the field is compatible with the mirror ghosts
    VectorField3::from_fn(GridSpec::unit_1d(n).unwrap(), |x| {
        let th = 0.5 * std::f64::consts::PI * (std::f64::consts::PI * x[0]).cos();
        [th.cos(), th.sin() * 0.8, th.sin() * 0.6]
    })
}

#[test]
fn equivalent_form_agrees_to_second_order() {
    let p = MaterialParams::dimensionless(1.0, 0.0, 0.1, 3.0);
    let gap = |n: usize| {
        let m = smooth_unit(n);
        let md = model(*m.grid(), p, FieldTerms::exchange_only());
        let mut full = md.rhs_full(0.0, &m).unwrap();
        full.axpy(p.beta, &grid::laplacian(&m));
        grid::l2_norm(&grid::difference(&md.rhs_equivalent_form(0.0, &m).unwrap(), &full))
    };
    let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| gap(n)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "{errs:?}");
    }
}

#[test]
fn energy_decreases_along_damped_flow() {
    let g = GridSpec::new_3d([6, 6, 1], [1.0, 1.0, 0.2]).unwrap();
    let p = MaterialParams::dimensionless(0.01, 0.2, 1.0, 0.0);
    let md = model(g, p, FieldTerms::micromagnetic([0.05, 0.02, 0.0]));
    let mut m = random_unit_field(g, 5);
    let mut e = md.energy(&m).unwrap().total;
    for _ in 0..200 {
        let t = md.torque(&m).unwrap();
        let vals: Vec<[f64; 3]> = cells(&m).iter().zip(cells(&t)).map(|(v, d)| normalize([0, 1, 2].map(|q| v[q] + 1e-3 * d[q]))).collect();
        m = VectorField3::from_interior(g, &vals).unwrap();
        let next = md.energy(&m).unwrap().total;
        assert!(next <= e + 1e-14, "{next} > {e}");
        e = next;
    }
}

#[test]
fn anisotropy_energy_of_hard_axis_state() {
    let g = GridSpec::new_3d([3, 5, 2], [0.6, 1.0, 0.1]).unwrap();
    let q = 0.37;
    let mut terms = FieldTerms::exchange_only();
    terms.anisotropy = true;
    let md = model(g, MaterialParams::dimensionless(1.0, q, 0.1, 0.0), terms);
    let e = md.energy(&VectorField3::uniform(g, [0.0, 1.0, 0.0])).unwrap();
    assert!((e.anisotropy - q * g.volume()).abs() < 1e-14);
    assert_eq!(e.exchange, 0.0);
    assert_eq!(md.energy(&VectorField3::uniform(g, [1.0, 0.0, 0.0])).unwrap().total, 0.0);
}

#[test]
fn zeeman_and_demag_energy_of_uniform_state() {
    let g = GridSpec::new_3d([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
    let he = [0.0, 0.0, 0.4];
    let md = model(g, MaterialParams::dimensionless(1.0, 0.0, 0.1, 0.0), FieldTerms::micromagnetic(he));
    let m = VectorField3::uniform(g, [0.0, 0.0, 1.0]);
    let e = md.energy(&m).unwrap();
    assert!((e.zeeman + 2.0 * 0.4).abs() < 1e-14);
    // a cube magnetized along an edge has demag factor 1/3
    assert!((e.demag - 1.0 / 3.0).abs() < 1e-12, "{}", e.demag);
}

proptest! {
    #[test]
    fn energy_is_invariant_under_sign_flip(seed in any::<u64>()) {
        let g = GridSpec::new_3d([3, 3, 2], [1.0, 1.0, 0.4]).unwrap();
        let mut terms = FieldTerms::micromagnetic([0.0; 3]);
        terms.zeeman = false;
        let md = model(g, MaterialParams::dimensionless(0.1, 0.2, 0.1, 0.0), terms);
        let m = random_unit_field(g, seed);
        let mut neg = m.clone();
        neg.scale(-1.0);
        let (a, b) = (md.energy(&m).unwrap().total, md.energy(&neg).unwrap().total);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(a >= -1e-12);
    }
}
