//! Closed-form solution of the scalar worked example.
//!
//! n = m = 1, T = 1, x0 = 1 with A = 1, B̄ = 1, D̄ = 1, Q = 1, Q̄ = −1, R = 1,
//! R̄ = −1/2, Ḡ = 1 and every other coefficient zero. Then
//!
//! ```text
//! P(t)    = (e^{2−2t} − 1) / 2        Π(t)    = e^{2−2t} / (3 − 2t)
//! E[x*]   = (3 − 2t) e^t / 3          E[u*]   = −(2/3) e^t
//! x*(t)   = (3 − 2t − 2W(t)) e^t / 3  u*(t)   = −(2/3) e^t
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::harness::Oracle;
use crate::problem::ProblemData;

pub fn example_problem() -> ProblemData {
    let mut p = ProblemData::zeros(1, 1, 1.0);
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    p.x0 = DVector::from_element(1, 1.0);
    p.a = one(1.0);
    p.b_bar = one(1.0);
    p.d_bar = one(1.0);
    p.q = one(1.0);
    p.q_bar = one(-1.0);
    p.r = one(1.0);
    p.r_bar = one(-0.5);
    p.g_bar = one(1.0);
    p
}

pub fn exact_p(t: f64) -> f64 {
    ((2.0 - 2.0 * t).exp() - 1.0) / 2.0
}

pub fn exact_pi(t: f64) -> f64 {
    (2.0 - 2.0 * t).exp() / (3.0 - 2.0 * t)
}

pub fn exact_mean_state(t: f64) -> f64 {
    (3.0 - 2.0 * t) * t.exp() / 3.0
}

pub fn exact_mean_control(t: f64) -> f64 {
    -2.0 / 3.0 * t.exp()
}

pub fn exact_state(t: f64, w: f64) -> f64 {
    (3.0 - 2.0 * t - 2.0 * w) * t.exp() / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactValues {
    pub p: f64,
    pub pi: f64,
    pub mean_x: f64,
    pub mean_u: f64,
    pub x_star: f64,
    pub u_star: f64,
}

/// All closed-form quantities at time `t` for Brownian value `w_t = W(t)`.
pub fn exact_values(t: f64, w_t: f64) -> Result<ExactValues> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError { t, lo: 0.0, hi: 1.0 });
    }
    Ok(ExactValues {
        p: exact_p(t),
        pi: exact_pi(t),
        mean_x: exact_mean_state(t),
        mean_u: exact_mean_control(t),
        x_star: exact_state(t, w_t),
        u_star: exact_mean_control(t),
    })
}

/// [`Oracle`] backed by the closed forms above.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExampleSolution;

impl Oracle for ExampleSolution {
    fn riccati(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        (
            DMatrix::from_element(1, 1, exact_p(t)),
            DMatrix::from_element(1, 1, exact_pi(t)),
        )
    }

    fn mean_state(&self, t: f64) -> DVector<f64> {
        DVector::from_element(1, exact_mean_state(t))
    }

    fn mean_control(&self, t: f64) -> DVector<f64> {
        DVector::from_element(1, exact_mean_control(t))
    }

    fn pathwise(&self, t: f64, w: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        Some((
            DVector::from_element(1, exact_state(t, w)),
            DVector::from_element(1, exact_mean_control(t)),
        ))
    }
}
