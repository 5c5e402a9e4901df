//! Mean-field linear-quadratic stochastic control by Riccati difference
//! equations.
//!
//! The workflow mirrors the numerical scheme end to end:
//!
//! 1. describe the problem with [`ProblemData`] and validate it into a [`Problem`];
//! 2. solve the two backward difference Riccati recursions
//!    ([`riccati::solve_p_difference`], [`riccati::solve_pi_difference`]);
//! 3. synthesize closed-loop gains ([`policy::synthesize_gains`]);
//! 4. run the deterministic mean recursion and the Monte Carlo closed loop
//!    ([`simulate::mean_recursion`], [`simulate::monte_carlo`]);
//! 5. optionally reconstruct the adjoint pair ([`bsde`]) and measure
//!    convergence rates against an exact or reference solution ([`harness`]).
//!
//! Runnable walkthroughs for each step live under `examples/`.

pub mod analytic;
pub mod bsde;
pub mod cli;
pub mod error;
pub mod export;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod policy;
pub mod problem;
pub mod riccati;
pub mod rng;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use mesh::TimeMesh;
pub use solver::DiscreteSolution;
pub use problem::{hat_transform, validate_problem, HatCoefficients, Problem, ProblemData};

pub use nalgebra::{DMatrix, DVector};
