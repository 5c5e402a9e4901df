//! Deterministic mean recursion, Monte Carlo closed loop and the discrete
//! cost for the worked example.
//!
//! ```bash
//! cargo run --release --example closed_loop_simulation
//! ```

use mflq::analytic::{example_problem, exact_mean_control, exact_mean_state, exact_pi};
use mflq::simulate::{discrete_cost, monte_carlo, McOptions};
use mflq::{DiscreteSolution, Problem, TimeMesh};

pub fn run() -> mflq::Result<()> {
    let problem = Problem::new(example_problem())?;
    let mesh = TimeMesh::new(problem.horizon, 32)?;
    let sol = DiscreteSolution::compute(&problem, mesh)?;

    let mc = monte_carlo(&problem, &sol.policy, &sol.means, &McOptions::new(10_000, 42))?;

    println!("   t     E[x] exact  E[x] scheme  E[x] sample (se)         E[u] exact  E[u] scheme");
    for k in (0..=mesh.steps()).step_by(8) {
        let t = mesh.t(k);
        let (eu_exact, eu) = if k < mesh.steps() {
            (exact_mean_control(t), sol.means.mean_u[k][0])
        } else {
            (f64::NAN, f64::NAN)
        };
        println!(
            "{t:5.3}  {:10.6}  {:11.6}  {:10.6} ({:.1e})  {eu_exact:10.6}  {eu:11.6}",
            exact_mean_state(t),
            sol.means.mean_x[k][0],
            mc.moments.mean_x[k][0],
            mc.moments.se_mean_x[k][0],
        );
    }

    let cost = discrete_cost(&problem, &mc.ensemble, &sol.means)?;
    println!(
        "J_tau = {:.6} +/- {:.6}; optimal value <Pi(0) x0, x0> = {:.6}",
        cost.j_tau,
        cost.standard_error,
        exact_pi(0.0)
    );
    println!("{}", serde_json::to_string_pretty(&cost.terms).expect("plain numbers"));
    Ok(())
}

#[allow(dead_code)]
fn main() -> mflq::Result<()> {
    run()
}
