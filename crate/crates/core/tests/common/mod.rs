#![allow(dead_code)]

use mflq::{DMatrix, DVector, ProblemData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `LLᵀ` with uniform `L`.
pub fn random_psd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let l = uniform_matrix(rng, n, n);
    &l * l.transpose()
}

/// Random data satisfying the standing assumptions. Barred weights may be
/// indefinite but never push the sums below zero.
pub fn random_problem(rng: &mut impl Rng, n: usize, m: usize, with_bars: bool) -> ProblemData {
    let mut p = ProblemData::zeros(n, m, 1.0);
    p.x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    p.a = uniform_matrix(rng, n, n);
    p.b = uniform_matrix(rng, n, m);
    p.c = uniform_matrix(rng, n, n);
    p.d = uniform_matrix(rng, n, m);
    p.q = random_psd(rng, n);
    p.r = random_psd(rng, m) + DMatrix::identity(m, m) * 0.5;
    p.g = random_psd(rng, n);
    if with_bars {
        p.a_bar = uniform_matrix(rng, n, n);
        p.b_bar = uniform_matrix(rng, n, m);
        p.c_bar = uniform_matrix(rng, n, n);
        p.d_bar = uniform_matrix(rng, n, m);
        p.q_bar = random_psd(rng, n) - &p.q * 0.5;
        p.r_bar = random_psd(rng, m) - &p.r * 0.5;
        p.g_bar = random_psd(rng, n) - &p.g * 0.5;
    }
    p
}

/// `min eig ≥ −tol·max(1, ‖M‖)`.
pub fn psd_within(m: &DMatrix<f64>, tol: f64) -> bool {
    let s = mflq::SymMatrix::symmetrize(m.clone());
    s.min_eigenvalue() >= -tol * mflq::linalg::spectral_norm(m).max(1.0)
}
