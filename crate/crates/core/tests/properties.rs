use adiabatic_crossings::bounds::{exponent_p, k_of_eps, ExponentCase};
use adiabatic_crossings::model::{Branch, FloquetModel, ModelSpec};
use adiabatic_crossings::spectral::{gap, ladder_gap};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_form_eigenpairs_solve_the_truncated_operator(s in -0.45f64..0.45, rho in 0.0f64..2.0, mode in -2i64..=2) {
        let model = FloquetModel::new(ModelSpec::modified(1.0, 1.0, rho, 20)).unwrap();
        let k = model.assemble(s).unwrap();
        prop_assert!(k.hermiticity_residual() < 1e-12);
        for branch in [Branch::Plus, Branch::Minus] {
            let e = model.exact_eigenvector(s, branch, mode).unwrap();
            let resid = (&k.matrix * &e.vector - e.vector.scale(e.value)).norm();
            prop_assert!(resid < 1e-8, "residual {resid}");
        }
    }

    #[test]
    fn truncated_gap_never_below_ladder_gap(s in -0.45f64..0.45) {
        let model = FloquetModel::new(ModelSpec::rwa(1.0, 1.0, 16)).unwrap();
        prop_assert!(gap(&model, s, 16).value + 1e-12 >= ladder_gap(&model, s));
    }

    #[test]
    fn exponent_is_positive_and_capped(alpha in 0.1f64..4.0, beta in 0.1f64..4.0, gamma in 0.0f64..4.0) {
        let r = exponent_p(alpha, beta, gamma, beta + 1.0);
        prop_assert!(r.p > 0.0);
        prop_assert!(r.p <= 1.0 / (1.0 + 2.0 * alpha) + 1e-15);
        prop_assert!(r.delta_ok);
        prop_assert_eq!(r.minus_nu, r.case == ExponentCase::Critical);
    }

    #[test]
    fn k_of_eps_is_monotone(e1 in 1e-9f64..1e-2, ratio in 1.0f64..100.0, beta in 0.5f64..2.0) {
        let u: Vec<f64> = (1..=300).map(|k| (k as f64).powf(-beta)).collect();
        let tau: Vec<f64> = (1..=300).map(|k| (k as f64).powi(-3)).collect();
        let big = k_of_eps(e1 * ratio, &u, &tau, 1.0).map(|s| s.k).unwrap_or(0);
        let small = k_of_eps(e1, &u, &tau, 1.0).map(|s| s.k).unwrap_or(0);
        prop_assert!(small >= big);
    }
}
