//! Small dense linear-algebra helpers shared by every solver.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for accepting an input matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative tolerance on the smallest eigenvalue for `M ⪰ 0`.
pub const PSD_TOL: f64 = 1e-10;
/// Absolute lower bound on the smallest eigenvalue for `M ≻ 0`.
pub const PD_TOL: f64 = 1e-10;

/// A square matrix that is exactly symmetric.
///
/// Every constructor symmetrizes with `(M + Mᵀ) / 2`, so downstream
/// eigenvalue checks always see symmetric input.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m` unconditionally. Panics if `m` is not square.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "SymMatrix requires a square matrix");
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    /// Accepts `m` only if it is symmetric to within [`SYMMETRY_TOL`].
    pub fn try_from_matrix(m: DMatrix<f64>, name: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: "square matrix".into(),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * (1.0 + m.amax()) {
            return Err(Error::NotSymmetric {
                name: name.to_string(),
                asymmetry: asym,
            });
        }
        Ok(Self::symmetrize(m))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.eigenvalues()[0]
    }

    /// `M ⪰ 0` up to `λ_min ≥ -PSD_TOL · (1 + ‖M‖)`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -PSD_TOL * (1.0 + spectral_norm(&self.0))
    }

    /// `M ≻ 0` up to `λ_min ≥ PD_TOL`.
    pub fn is_pd(&self) -> bool {
        self.min_eigenvalue() >= PD_TOL
    }
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Spectral norm `√ρ(MᵀM)`, from the symmetric eigenproblem of `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let gram = (&gram + gram.transpose()) * 0.5;
    let rho = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    rho.sqrt()
}

/// Solves `W X = H` for symmetric positive definite `W` by Cholesky.
///
/// No inverse is ever formed. Fails with `NotPositiveDefinite` when the
/// factorization breaks down or the smallest pivot falls below [`PD_TOL`].
pub fn spd_solve(w: &SymMatrix, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_solve_in(w, h, "spd_solve")
}

pub(crate) fn spd_solve_in(w: &SymMatrix, h: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if w.dim() != h.nrows() {
        return Err(Error::ShapeMismatch {
            name: format!("{context}: right-hand side"),
            expected: format!("{} rows", w.dim()),
            found: format!("{} rows", h.nrows()),
        });
    }
    let chol = Cholesky::new(w.as_matrix().clone()).ok_or_else(|| Error::NotPositiveDefinite {
        context: context.to_string(),
    })?;
    // each squared pivot is at least λ_min, so this only catches factors
    // that are numerically singular
    let l = chol.l_dirty();
    let min_pivot = (0..w.dim()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot * min_pivot >= PD_TOL * 1e-2) {
        return Err(Error::NotPositiveDefinite {
            context: context.to_string(),
        });
    }
    Ok(chol.solve(h))
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
