//! Invariants of the scheme on the worked example: monotone errors, bounded
//! Riccati sequences, gain convergence, Monte Carlo consistency and the
//! behavior of the rate harness.

mod common;

use mflq::analytic::{example_problem, exact_state, ExampleSolution};
use mflq::bsde::{reconstruct_means, reconstruct_path, YWeight};
use mflq::harness::{
    bsde_convergence, mean_convergence, power_levels, riccati_convergence, strong_convergence, RateReport,
    StudyOptions,
};
use mflq::linalg::spectral_norm;
use mflq::policy::continuous_gains;
use mflq::riccati::solve_continuous_reference;
use mflq::simulate::{discrete_cost, monte_carlo, McOptions};
use mflq::{DiscreteSolution, Problem, TimeMesh};

fn example() -> Problem {
    Problem::new(example_problem()).unwrap()
}

fn solve(p: &Problem, n: usize) -> DiscreteSolution {
    DiscreteSolution::compute(p, TimeMesh::new(p.horizon, n).unwrap()).unwrap()
}

fn assert_monotone(report: &RateReport) {
    for (i, pair) in report.levels.windows(2).enumerate() {
        let slack = if i == 0 { 1.1 } else { 1.0 };
        assert!(
            pair[1].error <= pair[0].error * slack,
            "{}: error rises from N={} to N={} ({} -> {})",
            report.metric,
            pair[0].steps,
            pair[1].steps,
            pair[0].error,
            pair[1].error
        );
    }
}

fn assert_stable_slope(report: &RateReport) {
    let full = report.slope().unwrap();
    let trimmed = report.without_coarsest().slope().unwrap();
    assert!(
        (full - trimmed).abs() < 0.15,
        "{}: slope {full} vs {trimmed} without the coarsest level",
        report.metric
    );
}

#[test]
fn deterministic_errors_decrease_with_n() {
    let p = example();
    let levels = power_levels(4, 10);
    let (rp, rpi) = riccati_convergence(&p, &levels, 1 << 14).unwrap();
    let (mx, mu) = mean_convergence(&p, &ExampleSolution, &levels).unwrap();
    let adjoint = bsde_convergence(&p, &ExampleSolution, &levels, &StudyOptions::new(16, 1)).unwrap();
    for report in [&rp, &rpi, &mx, &mu, &adjoint.mean_y, &adjoint.mean_z] {
        assert_monotone(report);
        assert_stable_slope(report);
    }
}

#[test]
fn pi_error_halves_with_tau() {
    let p = example();
    let reference = solve_continuous_reference(&p, 1 << 14).unwrap();
    let err = |n| mflq::riccati::riccati_error(&solve(&p, n).pi, &reference.pi).unwrap();
    let ratio = err(512) / err(1024);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn riccati_sequences_are_uniformly_bounded() {
    let p = example();
    let norms: Vec<(f64, f64)> = (4..=12)
        .map(|e| {
            let sol = solve(&p, 1 << e);
            (sol.p.max_norm(), sol.pi.max_norm())
        })
        .collect();
    for pick in [|v: &(f64, f64)| v.0, |v: &(f64, f64)| v.1] {
        let max = norms.iter().map(pick).fold(f64::MIN, f64::max);
        let min = norms.iter().map(pick).fold(f64::MAX, f64::min);
        assert!(max < 2.0 * min, "max {max}, min {min}");
    }
}

#[test]
fn gains_satisfy_their_linear_systems() {
    let mut rng = common::rng(21);
    for _ in 0..10 {
        let p = Problem::new(common::random_problem(&mut rng, 3, 2, true)).unwrap();
        let sol = solve(&p, 64);
        let pol = &sol.policy;
        for k in 0..64 {
            let r1 = pol.w1[k].as_matrix() * &pol.k1[k] - &pol.h1[k];
            let r2 = pol.w2[k].as_matrix() * &pol.k2[k] - &pol.h2[k];
            assert!(spectral_norm(&r1) <= 1e-10 * (1.0 + spectral_norm(&pol.h1[k])));
            assert!(spectral_norm(&r2) <= 1e-10 * (1.0 + spectral_norm(&pol.h2[k])));
        }
    }
}

#[test]
fn discrete_gains_approach_continuous_gains() {
    let p = example();
    let reference = solve_continuous_reference(&p, 1 << 14).unwrap();
    let gap = |n: usize| {
        let sol = solve(&p, n);
        (0..n)
            .map(|k| {
                let (pm, pim) = reference.at(sol.mesh.t(k));
                let (_, k2) = continuous_gains(&p, pm.as_matrix(), pim.as_matrix()).unwrap();
                spectral_norm(&(&sol.policy.k2[k] - k2))
            })
            .fold(0.0, f64::max)
    };
    for n in [64, 128, 256] {
        let ratio = gap(n) / gap(2 * n);
        assert!((2.0 * 0.7..=2.0 * 1.3).contains(&ratio), "N={n}: ratio {ratio}");
    }
}

#[test]
fn empirical_means_within_four_standard_errors() {
    let p = example();
    let sol = solve(&p, 32);
    let run = monte_carlo(&p, &sol.policy, &sol.means, &McOptions::new(1000, 17)).unwrap();
    let m = run.moments;
    for k in 0..=32 {
        let diff = (m.mean_x[k][0] - sol.means.mean_x[k][0]).abs();
        assert!(diff <= 4.0 * m.se_mean_x[k][0] + 1e-14, "k={k}: {diff} vs se {}", m.se_mean_x[k][0]);
    }
}

#[test]
fn terminal_variance_matches_closed_form() {
    let p = example();
    let sol = solve(&p, 32);
    let run = monte_carlo(&p, &sol.policy, &sol.means, &McOptions::new(10_000, 42)).unwrap();
    let finals: Vec<f64> = run.ensemble.paths.iter().map(|path| path.x[(0, 32)]).collect();
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let dev: Vec<f64> = finals.iter().map(|x| (x - mean).powi(2)).collect();
    let var = dev.iter().sum::<f64>() / n;
    let se = (dev.iter().map(|d| (d - var).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let exact = (2.0 * std::f64::consts::E / 3.0).powi(2);
    assert!((var - exact).abs() <= 4.0 * se, "Var {var} vs {exact} (se {se})");
    // the closed-form path is affine in W(1) with slope −2e/3
    assert!((exact_state(1.0, 1.0) - exact_state(1.0, 0.0) + 2.0 * std::f64::consts::E / 3.0).abs() < 1e-12);
}

#[test]
fn cost_is_not_negative_beyond_noise() {
    let mut rng = common::rng(5);
    for _ in 0..5 {
        let p = Problem::new(common::random_problem(&mut rng, 2, 2, true)).unwrap();
        let sol = solve(&p, 32);
        let run = monte_carlo(&p, &sol.policy, &sol.means, &McOptions::new(500, 3)).unwrap();
        let cost = discrete_cost(&p, &run.ensemble, &sol.means).unwrap();
        assert!(cost.j_tau >= -4.0 * cost.standard_error, "{cost:?}");
        assert!((cost.terms.total() - cost.j_tau).abs() <= 1e-12 * (1.0 + cost.j_tau.abs()));
    }
}

#[test]
fn strong_study_repeats_bit_for_bit() {
    let p = example();
    let levels = power_levels(4, 7);
    for paths in [1, 300] {
        let opts = StudyOptions::new(paths, 99);
        let a = strong_convergence(&p, &ExampleSolution, &levels, &opts).unwrap();
        let b = strong_convergence(&p, &ExampleSolution, &levels, &opts).unwrap();
        let finest = |r: &RateReport| r.levels.last().unwrap().error.to_bits();
        assert_eq!(finest(&a.0), finest(&b.0));
        assert_eq!(a, b);
    }
}

#[test]
fn strong_slope_is_stable() {
    let p = example();
    let (x, u) = strong_convergence(&p, &ExampleSolution, &power_levels(4, 9), &StudyOptions::new(2000, 4)).unwrap();
    assert_stable_slope(&x);
    assert_stable_slope(&u);
}

#[test]
fn noise_free_variant_strong_equals_squared_mean_error() {
    let mut d = example_problem();
    d.d_bar[(0, 0)] = 0.0;
    let p = Problem::new(d).unwrap();
    let oracle = mflq::harness::ReferenceOracle::new(&p, 1 << 14).unwrap();
    let levels = power_levels(4, 9);
    let (sx, _) = strong_convergence(&p, &oracle, &levels, &StudyOptions::new(1, 8)).unwrap();
    let (mx, _) = mean_convergence(&p, &oracle, &levels).unwrap();
    for (s, m) in sx.levels.iter().zip(&mx.levels) {
        assert!((s.error - m.error * m.error).abs() <= 1e-14);
    }
    assert!((sx.slope().unwrap() - 2.0 * mx.slope().unwrap()).abs() < 1e-9);
}

#[test]
fn y_weights_differ_only_in_the_y_fluctuation() {
    let p = example();
    let sol = solve(&p, 64);
    let means = reconstruct_means(&p, &sol.p, &sol.pi, &sol.means).unwrap();
    let run = monte_carlo(&p, &sol.policy, &sol.means, &McOptions::new(4, 2)).unwrap();
    for path in &run.ensemble.paths {
        let a = reconstruct_path(&p, &sol.p, &sol.pi, &sol.means, &means, path, YWeight::P).unwrap();
        let b = reconstruct_path(&p, &sol.p, &sol.pi, &sol.means, &means, path, YWeight::Pi).unwrap();
        assert_eq!(a.z, b.z);
        for k in 0..=64 {
            let fluct = path.x[(0, k)] - sol.means.mean_x[k][0];
            let want = (sol.pi.get(k)[(0, 0)] - sol.p.get(k)[(0, 0)]) * fluct;
            assert!((b.y[(0, k)] - a.y[(0, k)] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn both_y_weights_converge() {
    let p = example();
    let rates = bsde_convergence(&p, &ExampleSolution, &power_levels(4, 9), &StudyOptions::new(2000, 1)).unwrap();
    let by_p = rates.sq_y.slope().unwrap();
    let by_pi = rates.sq_y_pi.slope().unwrap();
    println!("second-moment y slopes: P-weighted {by_p:.3}, Pi-weighted {by_pi:.3}");
    assert!(by_p >= 0.7, "P-weighted slope {by_p}");
    assert!(by_pi >= 0.7, "Pi-weighted slope {by_pi}");
}
