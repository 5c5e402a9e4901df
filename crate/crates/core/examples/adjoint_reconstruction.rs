//! Reconstruct the adjoint pair (y, z) from the Riccati sequences and a few
//! simulated paths.
//!
//! ```bash
//! cargo run --release --example adjoint_reconstruction
//! ```

use mflq::analytic::{example_problem, exact_pi};
use mflq::bsde::{reconstruct_means, reconstruct_path, YWeight};
use mflq::simulate::{monte_carlo, McOptions};
use mflq::{DiscreteSolution, Problem, TimeMesh};

pub fn run() -> mflq::Result<()> {
    let problem = Problem::new(example_problem())?;
    let mesh = TimeMesh::new(problem.horizon, 1024)?;
    let sol = DiscreteSolution::compute(&problem, mesh)?;
    let adjoint = reconstruct_means(&problem, &sol.p, &sol.pi, &sol.means)?;

    println!(
        "E[y](0) = {:.6}, Pi(0) x0 = {:.6}, E[z](0) = {:.6}",
        adjoint.mean_y[0][0],
        exact_pi(0.0),
        adjoint.mean_z[0][0]
    );

    let mc = monte_carlo(&problem, &sol.policy, &sol.means, &McOptions::new(3, 5))?;
    for (i, path) in mc.ensemble.paths.iter().enumerate() {
        let by_p = reconstruct_path(&problem, &sol.p, &sol.pi, &sol.means, &adjoint, path, YWeight::P)?;
        let by_pi = reconstruct_path(&problem, &sol.p, &sol.pi, &sol.means, &adjoint, path, YWeight::Pi)?;
        let k = mesh.steps() / 2;
        println!(
            "path {i}: x(0.5) = {:.5}  y_P(0.5) = {:.5}  y_Pi(0.5) = {:.5}  z(0.5) = {:.5}",
            path.x[(0, k)],
            by_p.y[(0, k)],
            by_pi.y[(0, k)],
            by_p.z[(0, k)],
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mflq::Result<()> {
    run()
}
