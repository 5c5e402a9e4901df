//! Load a two-dimensional problem from JSON, check the standing assumptions
//! and measure the mean error against the RK4 reference.
//!
//! ```bash
//! cargo run --release --example custom_problem
//! ```

use mflq::harness::{mean_convergence, power_levels, ReferenceOracle};
use mflq::problem::{assess_assumptions, Problem, ProblemData};
use mflq::{DiscreteSolution, TimeMesh};

const PROBLEM: &str = r#"{
  "n": 2, "m": 1, "T": 1.0,
  "x0": [1.0, -0.5],
  "A": [[0.0, 1.0], [-1.0, -0.2]],
  "Abar": [[0.1, 0.0], [0.0, 0.1]],
  "B": [[0.0], [1.0]],
  "Bbar": [[0.0], [0.3]],
  "C": [[0.2, 0.0], [0.0, 0.1]],
  "Q": [[1.0, 0.0], [0.0, 0.5]],
  "Qbar": [[0.5, 0.0], [0.0, 0.0]],
  "R": [[1.0]],
  "Rbar": [[0.2]],
  "G": [[1.0, 0.0], [0.0, 1.0]]
}"#;

pub fn run() -> mflq::Result<()> {
    let data = ProblemData::from_json_str(PROBLEM)?;
    for check in assess_assumptions(&data)?.conditions {
        println!("{:12} min eig {:+.3}  {}", check.name, check.min_eigenvalue, if check.passed { "ok" } else { "FAILED" });
    }

    let mut bad = data.clone();
    bad.r_bar[(0, 0)] = -2.0;
    match Problem::new(bad) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }

    let problem = Problem::new(data)?;
    let sol = DiscreteSolution::compute(&problem, TimeMesh::new(problem.horizon, 256)?)?;
    println!("P_0 =\n{}Pi_0 =\n{}", sol.p.get(0).as_matrix(), sol.pi.get(0).as_matrix());
    println!("K2_0 = {}", sol.policy.k2[0]);

    let oracle = ReferenceOracle::new(&problem, 1 << 13)?;
    let (mx, _) = mean_convergence(&problem, &oracle, &power_levels(4, 9))?;
    for level in &mx.levels {
        println!("N = {:4}  sup |E[x] error| = {:.3e}", level.steps, level.error);
    }
    println!("slope {:?}", mx.slope());
    Ok(())
}

#[allow(dead_code)]
fn main() -> mflq::Result<()> {
    run()
}
