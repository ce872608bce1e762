mod common;

use common::oracles::{check, forced_model, rk2_pair, rk3_pair, ssp_pair};
use common::{cells, random_unit_field};
use llimex::experiments::ManufacturedRun;
use llimex::grid::{self, Dim, GridSpec, VectorField3};
use llimex::linsolve::GmresConfig;
use llimex::steppers::{builtin_tableau, imex_step, project, DiffusionSolver, SchemeId, StepConfig, StepError, Stepper};
use proptest::prelude::*;

#[test]
fn rk2_matches_literal_marching() {
    let (got, want) = rk2_pair(GridSpec::new_3d([5, 4, 3], [1.0, 0.8, 0.6]).unwrap(), 1);
    check(&got, &want);
}

#[test]
fn rk3_matches_literal_marching() {
    let (got, want) = rk3_pair(GridSpec::unit_1d(24).unwrap(), 1);
    check(&got, &want);
}

#[test]
fn ssp_matches_literal_marching() {
    let (got, want) = ssp_pair(GridSpec::new_3d([4, 4, 2], [1.0, 1.0, 0.5]).unwrap(), 1);
    check(&got, &want);
}

/// Cosine eigenmode of the Neumann Laplacian with explicit part `nu m`:
/// one step multiplies it by R(z_L, z_N), which must agree with
/// `exp(z_L + z_N)` to the order of the scheme.
#[test]
fn eigenmode_amplification_has_scheme_order() {
    let n = 32;
    let g = GridSpec::unit_1d(n).unwrap();
    let hh = 1.0 / n as f64;
    let mu = 4.0 / (hh * hh) * (std::f64::consts::PI / (2.0 * n as f64)).sin().powi(2);
    let mode = VectorField3::from_fn(g, |x| [(std::f64::consts::PI * x[0]).cos(), 0.0, 0.0]);
    let (beta, nu) = (0.8, -1.3);
    for (id, p) in [(SchemeId::ImexRk2, 2.0), (SchemeId::ImexRk3, 3.0), (SchemeId::SspImexRk2, 2.0)] {
        let err = |k: f64| {
            let mut diff = DiffusionSolver::new(g, beta);
            let mut lin = |_: f64, v: &VectorField3| {
                let mut o = v.clone();
                o.scale(nu);
                Ok(o)
            };
            let out = imex_step(&builtin_tableau(id).unwrap(), &mode, 0.0, k, &mut diff, &mut lin).unwrap();
            let ratio = out.get(g.cell(0, 0, 0))[0] / mode.get(g.cell(0, 0, 0))[0];
            // every cell carries the same ratio
            for c in g.interior() {
                assert!((out.get(c)[0] - ratio * mode.get(c)[0]).abs() < 1e-12);
            }
            (ratio - (k * (nu - beta * mu)).exp()).abs()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let local = (e1 / e2).log2();
        assert!(local > p + 0.8, "{id:?}: {local}");
    }
}

/// Self-convergence against a fine-step run on the same grid, so the
/// spatial error cancels.
#[test]
fn bdf2_is_second_order_in_time() {
    let run = |k: f64| {
        ManufacturedRun {
            scheme: SchemeId::Bdf2,
            dim: Dim::One,
            cells: 50,
            k,
            t_final: 0.02,
            alpha: 0.01,
            beta: 5.0,
            project: false,
            gmres: GmresConfig::default(),
        }
        .solve()
        .unwrap()
        .0
    };
    let reference = run(2e-3 / 64.0);
    let errs: Vec<f64> = [2e-3, 1e-3, 5e-4].iter().map(|&k| grid::linf_norm(&grid::difference(&run(k), &reference))).collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
    }
}

#[test]
fn bdf2_ld_handles_large_damping() {
    let run = |k: f64| {
        ManufacturedRun {
            scheme: SchemeId::Bdf2Ld,
            dim: Dim::One,
            cells: 200,
            k,
            t_final: 1e-3,
            alpha: 5.0,
            beta: 0.0,
            project: true,
            gmres: GmresConfig::default(),
        }
        .run()
        .unwrap()
    };
    let (a, b) = (run(2e-4), run(1e-4));
    assert!(a.linf.is_finite() && b.linf < a.linf, "{} {}", a.linf, b.linf);
}

#[test]
fn large_steps_stay_finite() {
    let g = GridSpec::new_3d([6, 6, 2], [1.0, 1.0, 0.3]).unwrap();
    for id in [SchemeId::ImexRk2, SchemeId::SspImexRk2, SchemeId::Bdf2] {
        let md = forced_model(g, 5.0, false);
        let mut cfg = StepConfig::new(id, 0.5).projected(true);
        cfg.precondition = true;
        let mut s = Stepper::new(md, cfg, random_unit_field(g, 4), 0.0).unwrap();
        for _ in 0..5 {
            s.step().unwrap();
        }
        assert!(s.m().all_finite(), "{id:?}");
    }
}

#[test]
fn projected_steps_keep_unit_length() {
    let g = GridSpec::unit_1d(20).unwrap();
    for id in [SchemeId::ImexRk2, SchemeId::ImexRk3, SchemeId::Bdf2, SchemeId::Bdf2Ld] {
        let md = forced_model(g, 1.0, false);
        let mut s = Stepper::new(md, StepConfig::new(id, 1e-3).projected(true), random_unit_field(g, 5), 0.0).unwrap();
        s.advance_to(0.01).unwrap();
        for v in cells(s.m()) {
            assert!(((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs() < 1e-14, "{id:?}");
        }
    }
}

#[test]
fn projection_rejects_zero_vectors() {
    let g = GridSpec::unit_1d(4).unwrap();
    let mut m = VectorField3::uniform(g, [0.0, 3.0, 4.0]);
    assert_eq!(cells(&project(&m).unwrap())[2], [0.0, 0.6, 0.8]);
    m.set(g.cell(2, 0, 0), [0.0; 3]);
    assert!(matches!(project(&m), Err(StepError::ZeroLength { cell: [2, 0, 0], .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// With `N = -gamma m`, gamma >= 0, the SSP scheme does not grow the l2 norm.
    #[test]
    fn ssp_is_l2_nonincreasing_for_dissipative_parts(seed in any::<u64>(), k in 1e-3f64..1.0, gamma in 0.0f64..4.0, beta in 0.0f64..10.0) {
        let g = GridSpec::unit_1d(16).unwrap();
        let m = common::random_field(g, seed);
        let mut diff = DiffusionSolver::new(g, beta);
        let mut lin = |_: f64, v: &VectorField3| {
            let mut o = v.clone();
            o.scale(-gamma);
            Ok(o)
        };
        let out = imex_step(&builtin_tableau(SchemeId::SspImexRk2).unwrap(), &m, 0.0, k.min(0.5 / gamma.max(1e-9)), &mut diff, &mut lin).unwrap();
        prop_assert!(grid::l2_norm(&out) <= grid::l2_norm(&m) * (1.0 + 1e-12));
    }
}
