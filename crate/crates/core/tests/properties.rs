mod common;

use mflq::linalg::{spd_solve, spectral_norm};
use mflq::problem::{assess_assumptions, hat_transform};
use mflq::riccati::tilde_discrete;
use mflq::rng::coarsen;
use mflq::{DMatrix, DVector, DiscreteSolution, Problem, SymMatrix, TimeMesh};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn riccati_quantities_stay_psd(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3) {
        let mut rng = common::rng(seed);
        let p = Problem::new(common::random_problem(&mut rng, n, m, true)).unwrap();
        let sol = DiscreteSolution::compute(&p, TimeMesh::new(1.0, 64).unwrap()).unwrap();
        let tilde = tilde_discrete(&p, &sol.p).unwrap();
        let r_hat = p.hat().r.as_matrix();
        for k in 0..=64 {
            prop_assert!(common::psd_within(sol.p.get(k), TOL), "P_{}", k);
            prop_assert!(common::psd_within(sol.pi.get(k), TOL), "Pi_{}", k);
            prop_assert!(common::psd_within(&tilde.q[k], TOL), "Q~_{}", k);
            prop_assert!(common::psd_within(&(tilde.r[k].as_matrix() - r_hat), TOL), "R~_{} - R^", k);
            prop_assert_eq!(sol.p.get(k).as_matrix(), &sol.p.get(k).transpose());
        }
    }

    #[test]
    fn control_is_linear_in_state_and_mean(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut rng = common::rng(seed);
        let p = Problem::new(common::random_problem(&mut rng, 2, 2, true)).unwrap();
        let sol = DiscreteSolution::compute(&p, TimeMesh::new(1.0, 8).unwrap()).unwrap();
        let x1 = DVector::from_fn(2, |i, _| i as f64 + 0.3);
        let x2 = DVector::from_fn(2, |i, _| 1.0 - i as f64);
        let e1 = DVector::from_fn(2, |i, _| 0.5 * i as f64 - 0.2);
        let e2 = DVector::from_fn(2, |_, _| 0.7);
        let pol = &sol.policy;
        for k in 0..8 {
            let lhs = pol.control(k, &(&x1 * alpha + &x2 * beta), &(&e1 * alpha + &e2 * beta)).unwrap();
            let rhs = pol.control(k, &x1, &e1).unwrap() * alpha + pol.control(k, &x2, &e2).unwrap() * beta;
            prop_assert!((lhs - &rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn adding_psd_weight_keeps_problem_valid(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let data = common::random_problem(&mut rng, 3, 2, true);
        prop_assert!(assess_assumptions(&data).unwrap().passed());
        let mut heavier = data.clone();
        heavier.q += common::random_psd(&mut rng, 3);
        heavier.r += common::random_psd(&mut rng, 2);
        heavier.g_bar += common::random_psd(&mut rng, 3);
        prop_assert!(assess_assumptions(&heavier).unwrap().passed());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_norm_is_at_most_one(seed in any::<u64>(), rows in 1usize..=4, cols in 1usize..=4) {
        let mut rng = common::rng(seed);
        let k = common::uniform_matrix(&mut rng, rows, cols) * 5.0;
        let r0 = common::random_psd(&mut rng, cols) + DMatrix::identity(cols, cols) * 1e-3;
        let w = SymMatrix::symmetrize(&r0 + k.transpose() * &k);
        let proj = &k * spd_solve(&w, &k.transpose()).unwrap();
        prop_assert!(spectral_norm(&proj) <= 1.0 + 1e-10);
    }

    #[test]
    fn spd_solve_recovers_solution(seed in any::<u64>(), n in 1usize..=4, cols in 1usize..=3) {
        let mut rng = common::rng(seed);
        let w = SymMatrix::symmetrize(common::random_psd(&mut rng, n) + DMatrix::identity(n, n));
        let x = common::uniform_matrix(&mut rng, n, cols);
        let h = w.as_matrix() * &x;
        let got = spd_solve(&w, &h).unwrap();
        prop_assert!((got - x).amax() <= 1e-10);
    }

    #[test]
    fn hat_transform_is_additive(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let d = common::random_problem(&mut rng, 2, 3, true);
        let hat = hat_transform(&d);
        prop_assert_eq!(hat.a, &d.a + &d.a_bar);
        prop_assert_eq!(hat.b, &d.b + &d.b_bar);
        prop_assert_eq!(hat.d, &d.d + &d.d_bar);
        prop_assert!((hat.q.as_matrix() - (&d.q + &d.q_bar)).amax() <= 1e-15);
        prop_assert!((hat.r.as_matrix() - (&d.r + &d.r_bar)).amax() <= 1e-15);
    }

    #[test]
    fn coarsening_telescopes(values in prop::collection::vec(-1.0f64..1.0, 64), ratio_exp in 0u32..=6) {
        let ratio = 1usize << ratio_exp;
        let coarse = coarsen(&values, ratio);
        prop_assert_eq!(coarse.len(), 64 / ratio);
        for (i, c) in coarse.iter().enumerate() {
            let block = values[i * ratio..(i + 1) * ratio].iter().fold(0.0, |acc, v| acc + v);
            prop_assert_eq!(*c, block);
        }
    }
}
