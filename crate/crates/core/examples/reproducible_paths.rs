//! Counter-based Brownian increments: any path can be regenerated on its
//! own, coarse levels are block sums of the fine grid, and ensembles do not
//! depend on the worker count.
//!
//! ```bash
//! cargo run --example reproducible_paths
//! ```

use mflq::analytic::example_problem;
use mflq::rng::{coarsen, BrownianSource};
use mflq::simulate::{monte_carlo, McOptions};
use mflq::{DiscreteSolution, Problem, TimeMesh};

pub fn run() -> mflq::Result<()> {
    let fine = TimeMesh::new(1.0, 16)?;
    let source = BrownianSource::new(7, fine);

    let path3 = source.fine_increments(3);
    assert_eq!(path3, source.fine_increments(3));
    let coarse = coarsen(&path3, 4);
    println!("fine increments of path 3: {:?}", &path3[..4]);
    println!("first coarse increment {:.6} = sum of first four fine ones", coarse[0]);
    println!("W(1) on both grids: {:.6} {:.6}", path3.iter().sum::<f64>(), coarse.iter().sum::<f64>());

    let problem = Problem::new(example_problem())?;
    let sol = DiscreteSolution::compute(&problem, TimeMesh::new(1.0, 64)?)?;
    let mut opts = McOptions::new(500, 7);
    opts.workers = Some(1);
    let serial = monte_carlo(&problem, &sol.policy, &sol.means, &opts)?;
    opts.workers = Some(4);
    let parallel = monte_carlo(&problem, &sol.policy, &sol.means, &opts)?;
    println!("identical across worker counts: {}", serial == parallel);
    Ok(())
}

#[allow(dead_code)]
fn main() -> mflq::Result<()> {
    run()
}
