//! Solve both Riccati difference equations for the worked example and
//! compare with the closed forms.
//!
//! ```bash
//! cargo run --example solve_riccati
//! ```

use mflq::analytic::{example_problem, exact_p, exact_pi};
use mflq::riccati::{solve_continuous_reference, solve_p_difference, solve_pi_difference};
use mflq::{Problem, TimeMesh};

pub fn run() -> mflq::Result<()> {
    let problem = Problem::new(example_problem())?;

    for steps in [2, 16, 128, 1024] {
        let mesh = TimeMesh::new(problem.horizon, steps)?;
        let p = solve_p_difference(&problem, &mesh)?;
        let pi = solve_pi_difference(&problem, &mesh, &p)?;
        println!(
            "N = {steps:5}  P_0 = {:.6} (exact {:.6})  Pi_0 = {:.6} (exact {:.6})  min eig {:.2e}",
            p.get(0)[(0, 0)],
            exact_p(0.0),
            pi.get(0)[(0, 0)],
            exact_pi(0.0),
            p.min_eigenvalue().min(pi.min_eigenvalue()),
        );
    }

    // RK4 on a fine grid stands in for the closed form on general problems
    let reference = solve_continuous_reference(&problem, 1 << 14)?;
    let (pm, pim) = reference.at(0.5);
    println!(
        "reference at t = 0.5: P = {:.10} (exact {:.10}), Pi = {:.10} (exact {:.10})",
        pm[(0, 0)],
        exact_p(0.5),
        pim[(0, 0)],
        exact_pi(0.5)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> mflq::Result<()> {
    run()
}
