//! Closed-loop feedback gains `u = −K¹(x − E[x]) − K²E[x]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{spd_solve_in, SymMatrix};
use crate::mesh::TimeMesh;
use crate::problem::Problem;
use crate::riccati::{ContinuousRiccatiReference, RiccatiSequence};

/// Per-step gain factors and the solved gains `K = W⁻¹H`, k = 0..N−1.
#[derive(Debug, Clone)]
pub struct FeedbackPolicy {
    pub mesh: TimeMesh,
    pub w1: Vec<SymMatrix>,
    pub h1: Vec<DMatrix<f64>>,
    pub w2: Vec<SymMatrix>,
    pub h2: Vec<DMatrix<f64>>,
    pub k1: Vec<DMatrix<f64>>,
    pub k2: Vec<DMatrix<f64>>,
}

/// Builds all gains up front from `P_{k+1}` and `Π_{k+1}`:
///
/// ```text
/// W¹_k = R + τBᵀP_{k+1}B + DᵀP_{k+1}D      H¹_k = BᵀP_{k+1}(I+Aτ) + DᵀP_{k+1}C
/// W²_k = R̂ + τB̂ᵀΠ_{k+1}B̂ + D̂ᵀP_{k+1}D̂     H²_k = B̂ᵀΠ_{k+1}(I+Âτ) + D̂ᵀP_{k+1}Ĉ
/// ```
pub fn synthesize_gains(p: &Problem, pseq: &RiccatiSequence, piseq: &RiccatiSequence) -> Result<FeedbackPolicy> {
    let mesh = *pseq.mesh();
    if piseq.mesh() != &mesh {
        return Err(Error::MeshMismatch("P and Pi sequences are on different meshes".into()));
    }
    let hat = p.hat();
    let tau = mesh.tau();
    let steps = mesh.steps();
    let n = p.n;
    let f = DMatrix::identity(n, n) + &p.a * tau;
    let f_hat = DMatrix::identity(n, n) + &hat.a * tau;
    let (bt, dt) = (p.b.transpose(), p.d.transpose());
    let (bht, dht) = (hat.b.transpose(), hat.d.transpose());

    let mut policy = FeedbackPolicy {
        mesh,
        w1: Vec::with_capacity(steps),
        h1: Vec::with_capacity(steps),
        w2: Vec::with_capacity(steps),
        h2: Vec::with_capacity(steps),
        k1: Vec::with_capacity(steps),
        k2: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        let pn = pseq.get(k + 1).as_matrix();
        let pin = piseq.get(k + 1).as_matrix();
        let w1 = SymMatrix::symmetrize(&p.r + &bt * pn * &p.b * tau + &dt * pn * &p.d);
        let h1 = &bt * pn * &f + &dt * pn * &p.c;
        let w2 = SymMatrix::symmetrize(hat.r.as_matrix() + &bht * pin * &hat.b * tau + &dht * pn * &hat.d);
        let h2 = &bht * pin * &f_hat + &dht * pn * &hat.c;
        policy.k1.push(spd_solve_in(&w1, &h1, &format!("W1 at step {k}"))?);
        policy.k2.push(spd_solve_in(&w2, &h2, &format!("W2 at step {k}"))?);
        policy.w1.push(w1);
        policy.h1.push(h1);
        policy.w2.push(w2);
        policy.h2.push(h2);
    }
    Ok(policy)
}

impl FeedbackPolicy {
    pub fn steps(&self) -> usize {
        self.mesh.steps()
    }

    /// `u_k = −K¹_k(x − E[x]) − K²_k E[x]`.
    pub fn control(&self, k: usize, x: &DVector<f64>, mean_x: &DVector<f64>) -> Result<DVector<f64>> {
        if k >= self.steps() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.steps(),
            });
        }
        Ok(-(&self.k1[k] * (x - mean_x)) - &self.k2[k] * mean_x)
    }
}

/// Free-function form of [`FeedbackPolicy::control`].
pub fn control_discrete(
    policy: &FeedbackPolicy,
    k: usize,
    x: &DVector<f64>,
    mean_x: &DVector<f64>,
) -> Result<DVector<f64>> {
    policy.control(k, x, mean_x)
}

/// Continuous gains `(Σ₀⁻¹[BᵀP + DᵀPC], Σ₁⁻¹[B̂ᵀΠ + D̂ᵀPĈ])` for given `P`, `Π`.
pub fn continuous_gains(p: &Problem, pm: &DMatrix<f64>, pim: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let hat = p.hat();
    let sigma0 = SymMatrix::symmetrize(&p.r + p.d.transpose() * pm * &p.d);
    let sigma1 = SymMatrix::symmetrize(hat.r.as_matrix() + hat.d.transpose() * pm * &hat.d);
    let k1 = spd_solve_in(&sigma0, &(p.b.transpose() * pm + p.d.transpose() * pm * &p.c), "Sigma0")?;
    let k2 = spd_solve_in(&sigma1, &(hat.b.transpose() * pim + hat.d.transpose() * pm * &hat.c), "Sigma1")?;
    Ok((k1, k2))
}

/// The optimal feedback of the continuous problem at time `t`, with `P`
/// and `Π` read from the nearest reference grid point.
pub fn control_continuous(
    p: &Problem,
    reference: &ContinuousRiccatiReference,
    t: f64,
    x: &DVector<f64>,
    mean_x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (pm, pim) = reference.at(t);
    let (k1, k2) = continuous_gains(p, pm, pim)?;
    Ok(-(&k1 * (x - mean_x)) - k2 * mean_x)
}
