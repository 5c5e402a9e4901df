//! Deterministic part of the scheme on one mesh: both Riccati sequences, the
//! feedback policy and the mean trajectory.

use crate::error::Result;
use crate::mesh::TimeMesh;
use crate::policy::{synthesize_gains, FeedbackPolicy};
use crate::problem::Problem;
use crate::riccati::{solve_p_difference, solve_pi_difference, RiccatiSequence};
use crate::simulate::{mean_recursion, MeanTrajectory};

#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub mesh: TimeMesh,
    pub p: RiccatiSequence,
    pub pi: RiccatiSequence,
    pub policy: FeedbackPolicy,
    pub means: MeanTrajectory,
}

impl DiscreteSolution {
    pub fn compute(problem: &Problem, mesh: TimeMesh) -> Result<Self> {
        let p = solve_p_difference(problem, &mesh)?;
        let pi = solve_pi_difference(problem, &mesh, &p)?;
        let policy = synthesize_gains(problem, &p, &pi)?;
        let means = mean_recursion(problem, &policy)?;
        Ok(Self {
            mesh,
            p,
            pi,
            policy,
            means,
        })
    }
}
