//! Backward difference Riccati recursions and their continuous references.
//!
//! `P_k` solves the recursion of the auxiliary stochastic LQ problem (plain
//! coefficients); `Π_k` solves the recursion of the deterministic problem
//! whose coefficients are the tilde transforms of the hats, built from
//! `P_k`. The continuous equations are integrated with classical RK4 on a
//! fine grid and serve as oracles for the discrete sequences.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{spd_solve_in, spectral_norm, SymMatrix};
use crate::mesh::TimeMesh;
use crate::problem::Problem;

/// Entry magnitude beyond which the RK4 reference is declared unstable.
pub const UNSTABLE_MAGNITUDE: f64 = 1e12;
/// Smallest admissible reference resolution.
pub const MIN_REFERENCE_STEPS: usize = 1 << 12;

/// `N + 1` symmetric matrices indexed forward in time, `values[k] ≈ X(t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSequence {
    mesh: TimeMesh,
    values: Vec<SymMatrix>,
}

impl RiccatiSequence {
    pub fn new(mesh: TimeMesh, values: Vec<SymMatrix>) -> Result<Self> {
        if values.len() != mesh.steps() + 1 {
            return Err(Error::MeshMismatch(format!(
                "{} values for a mesh with {} points",
                values.len(),
                mesh.steps() + 1
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn values(&self) -> &[SymMatrix] {
        &self.values
    }

    pub fn get(&self, k: usize) -> &SymMatrix {
        &self.values[k]
    }

    /// Smallest eigenvalue over all entries.
    pub fn min_eigenvalue(&self) -> f64 {
        self.values
            .iter()
            .map(SymMatrix::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn all_psd(&self) -> bool {
        self.values.iter().all(SymMatrix::is_psd)
    }

    /// `max_k ‖X_k‖`.
    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| spectral_norm(v))
            .fold(0.0, f64::max)
    }
}

/// P_N = G, then for k = N-1..0
///
/// ```text
/// W¹_k = R + τ BᵀP_{k+1}B + DᵀP_{k+1}D
/// H¹_k = BᵀP_{k+1}(I + Aτ) + DᵀP_{k+1}C
/// P_k  = τQ + (I+Aτ)ᵀP_{k+1}(I+Aτ) + τCᵀP_{k+1}C − τ(H¹_k)ᵀ(W¹_k)⁻¹H¹_k
/// ```
pub fn solve_p_difference(p: &Problem, mesh: &TimeMesh) -> Result<RiccatiSequence> {
    let n = p.n;
    let tau = mesh.tau();
    let steps = mesh.steps();
    let f = DMatrix::identity(n, n) + &p.a * tau;
    let (bt, dt, ct, ft) = (p.b.transpose(), p.d.transpose(), p.c.transpose(), f.transpose());

    let mut values = vec![SymMatrix::zeros(n); steps + 1];
    values[steps] = SymMatrix::symmetrize(p.g.clone());
    for k in (0..steps).rev() {
        let next = values[k + 1].as_matrix();
        let pb = next * &p.b;
        let w1 = SymMatrix::symmetrize(&p.r + &bt * &pb * tau + &dt * next * &p.d);
        let h1 = &bt * next * &f + &dt * next * &p.c;
        let gain = spd_solve_in(&w1, &h1, &format!("W1 at step {k}"))?;
        let pk = &p.q * tau + &ft * next * &f + &ct * next * &p.c * tau - h1.transpose() * gain * tau;
        values[k] = SymMatrix::symmetrize(pk);
    }
    RiccatiSequence::new(*mesh, values)
}

/// Discrete tilde coefficients, one set per grid point.
#[derive(Debug, Clone)]
pub struct TildeCoefficients {
    /// `Q̃_k = Q̂ + ĈᵀP_kĈ − ĈᵀP_kD̂ Σ₁⁻¹ D̂ᵀP_kĈ`
    pub q: Vec<SymMatrix>,
    /// `R̃_k = Σ₁(k) = R̂ + D̂ᵀP_kD̂`
    pub r: Vec<SymMatrix>,
    /// `Ã_k = Â − B̂ Σ₁⁻¹ D̂ᵀP_kĈ`
    pub a: Vec<DMatrix<f64>>,
    /// `B̃ = B̂`
    pub b: DMatrix<f64>,
    /// `G̃ = Ĝ`
    pub g: SymMatrix,
}

impl TildeCoefficients {
    /// `Σ₁` at grid point `k`; identical to `R̃_k`.
    pub fn sigma1(&self, k: usize) -> &SymMatrix {
        &self.r[k]
    }
}

pub fn tilde_discrete(p: &Problem, pseq: &RiccatiSequence) -> Result<TildeCoefficients> {
    let hat = p.hat();
    let (ct, dt) = (hat.c.transpose(), hat.d.transpose());
    let len = pseq.values().len();
    let mut q = Vec::with_capacity(len);
    let mut r = Vec::with_capacity(len);
    let mut a = Vec::with_capacity(len);
    for (k, pk) in pseq.values().iter().enumerate() {
        let pk = pk.as_matrix();
        let sigma1 = SymMatrix::symmetrize(hat.r.as_matrix() + &dt * pk * &hat.d);
        let coupling = &dt * pk * &hat.c;
        let l = spd_solve_in(&sigma1, &coupling, &format!("Sigma1 at step {k}"))?;
        let qk = hat.q.as_matrix() + &ct * pk * &hat.c - &ct * pk * &hat.d * &l;
        q.push(SymMatrix::symmetrize(qk));
        a.push(&hat.a - &hat.b * &l);
        r.push(sigma1);
    }
    Ok(TildeCoefficients {
        q,
        r,
        a,
        b: hat.b.clone(),
        g: hat.g.clone(),
    })
}

/// Π_N = Ĝ, then for k = N-1..0
///
/// ```text
/// W_k = R̃_k + τ B̃ᵀΠ_{k+1}B̃
/// H_k = B̃ᵀΠ_{k+1}(I + Ã_kτ)
/// Π_k = (I+Ã_kτ)ᵀΠ_{k+1}(I+Ã_kτ) + τQ̃_k − τH_kᵀW_k⁻¹H_k
/// ```
///
/// `R̃_k` is built from `P_k`, not `P_{k+1}`.
pub fn solve_pi_difference(p: &Problem, mesh: &TimeMesh, pseq: &RiccatiSequence) -> Result<RiccatiSequence> {
    if pseq.mesh() != mesh {
        return Err(Error::MeshMismatch("P sequence is on a different mesh".into()));
    }
    let tilde = tilde_discrete(p, pseq)?;
    solve_pi_with_tilde(p.n, mesh, &tilde)
}

pub fn solve_pi_with_tilde(n: usize, mesh: &TimeMesh, tilde: &TildeCoefficients) -> Result<RiccatiSequence> {
    let tau = mesh.tau();
    let steps = mesh.steps();
    let bt = tilde.b.transpose();
    let mut values = vec![SymMatrix::zeros(n); steps + 1];
    values[steps] = tilde.g.clone();
    for k in (0..steps).rev() {
        let next = values[k + 1].as_matrix();
        let f = DMatrix::identity(n, n) + &tilde.a[k] * tau;
        let w = SymMatrix::symmetrize(tilde.r[k].as_matrix() + &bt * next * &tilde.b * tau);
        let h = &bt * next * &f;
        let gain = spd_solve_in(&w, &h, &format!("W at step {k}"))?;
        let pik = f.transpose() * next * &f + tilde.q[k].as_matrix() * tau - h.transpose() * gain * tau;
        values[k] = SymMatrix::symmetrize(pik);
    }
    RiccatiSequence::new(*mesh, values)
}

/// Fine-grid RK4 solutions of the two continuous Riccati equations.
#[derive(Debug, Clone)]
pub struct ContinuousRiccatiReference {
    pub p: RiccatiSequence,
    pub pi: RiccatiSequence,
    /// False when some entry has an eigenvalue below the PSD tolerance.
    pub psd_ok: bool,
}

impl ContinuousRiccatiReference {
    pub fn mesh(&self) -> &TimeMesh {
        self.p.mesh()
    }

    /// `(P(t), Π(t))` at the reference grid point nearest to `t`.
    pub fn at(&self, t: f64) -> (&SymMatrix, &SymMatrix) {
        let j = self.mesh().nearest_index(t);
        (self.p.get(j), self.pi.get(j))
    }
}

/// Backward-time derivative `−(P', Π')` of the coupled system.
fn riccati_rhs(p: &Problem, pm: &DMatrix<f64>, pim: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let hat = p.hat();
    let sigma0 = SymMatrix::symmetrize(&p.r + p.d.transpose() * pm * &p.d);
    let s0 = p.b.transpose() * pm + p.d.transpose() * pm * &p.c;
    let k0 = spd_solve_in(&sigma0, &s0, "Sigma0")?;
    let dp = pm * &p.a + p.a.transpose() * pm + p.c.transpose() * pm * &p.c + &p.q - s0.transpose() * k0;

    let sigma1 = SymMatrix::symmetrize(hat.r.as_matrix() + hat.d.transpose() * pm * &hat.d);
    let s1 = hat.b.transpose() * pim + hat.d.transpose() * pm * &hat.c;
    let k1 = spd_solve_in(&sigma1, &s1, "Sigma1")?;
    let dpi = pim * &hat.a + hat.a.transpose() * pim + hat.c.transpose() * pm * &hat.c + hat.q.as_matrix()
        - s1.transpose() * k1;
    Ok((dp, dpi))
}

/// Integrates both continuous Riccati equations backward from `T` with RK4.
///
/// `P` and `Π` are advanced together as one system, so the stage values of
/// `P` feeding the `Π` equation are the RK4 stages themselves.
pub fn solve_continuous_reference(p: &Problem, n_ref: usize) -> Result<ContinuousRiccatiReference> {
    if !n_ref.is_power_of_two() || n_ref < MIN_REFERENCE_STEPS {
        return Err(Error::InvalidMesh(format!(
            "reference resolution must be a power of two >= {MIN_REFERENCE_STEPS}, got {n_ref}"
        )));
    }
    let mesh = TimeMesh::new(p.horizon, n_ref)?;
    let h = mesh.tau();
    let n = p.n;
    let mut ps = vec![SymMatrix::zeros(n); n_ref + 1];
    let mut pis = vec![SymMatrix::zeros(n); n_ref + 1];
    let mut cur_p = p.g.clone();
    let mut cur_pi = p.hat().g.as_matrix().clone();
    ps[n_ref] = SymMatrix::symmetrize(cur_p.clone());
    pis[n_ref] = SymMatrix::symmetrize(cur_pi.clone());

    for step in 0..n_ref {
        let (k1p, k1q) = riccati_rhs(p, &cur_p, &cur_pi)?;
        let (k2p, k2q) = riccati_rhs(p, &(&cur_p + &k1p * (h / 2.0)), &(&cur_pi + &k1q * (h / 2.0)))?;
        let (k3p, k3q) = riccati_rhs(p, &(&cur_p + &k2p * (h / 2.0)), &(&cur_pi + &k2q * (h / 2.0)))?;
        let (k4p, k4q) = riccati_rhs(p, &(&cur_p + &k3p * h), &(&cur_pi + &k3q * h))?;
        let next_p = &cur_p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        let next_pi = &cur_pi + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
        let sp = SymMatrix::symmetrize(next_p);
        let spi = SymMatrix::symmetrize(next_pi);
        let magnitude = sp.amax().max(spi.amax());
        if !(magnitude <= UNSTABLE_MAGNITUDE) {
            return Err(Error::StepUnstable { step, magnitude });
        }
        let j = n_ref - step - 1;
        cur_p = sp.as_matrix().clone();
        cur_pi = spi.as_matrix().clone();
        ps[j] = sp;
        pis[j] = spi;
    }

    let p_seq = RiccatiSequence::new(mesh, ps)?;
    let pi_seq = RiccatiSequence::new(mesh, pis)?;
    let psd_ok = p_seq.all_psd() && pi_seq.all_psd();
    Ok(ContinuousRiccatiReference {
        p: p_seq,
        pi: pi_seq,
        psd_ok,
    })
}

/// `max_k ‖X(t_k) − X_k‖` over the coarse grid, in the spectral norm.
pub fn riccati_error(seq: &RiccatiSequence, reference: &RiccatiSequence) -> Result<f64> {
    let ratio = reference.mesh().refinement_of(seq.mesh())?;
    Ok(seq
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| spectral_norm(&(v.as_matrix() - reference.get(k * ratio).as_matrix())))
        .fold(0.0, f64::max))
}
