//! Algebraic reconstruction of the adjoint pair `(y, z)` from the Riccati
//! sequences and a simulated closed-loop path. No backward time stepping and
//! no conditional expectations are involved.
//!
//! Terminal-sign convention: the maximum principle writes `y(T) = −Gx*(T)`,
//! while the reconstruction below carries no minus sign. The formulas are
//! implemented without the sign, and the continuous identity they are
//! compared against uses the same convention.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::riccati::RiccatiSequence;
use crate::simulate::{MeanTrajectory, SimulatedPath};

/// Which Riccati sequence weights the state fluctuation in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YWeight {
    /// `y_k = P_k(x_k − Ex_k) + Ey_k`, consistent with the continuous identity.
    #[default]
    P,
    /// `y_k = Π_k(x_k − Ex_k) + Ey_k`, the variant with `Π` on the fluctuation.
    Pi,
}

impl std::str::FromStr for YWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" | "P" => Ok(YWeight::P),
            "pi" | "Pi" | "PI" => Ok(YWeight::Pi),
            other => Err(Error::InvalidConfig(format!("unknown y weight {other:?}, expected p or pi"))),
        }
    }
}

/// `Ey_k = Π_k Ex_k` (k = 0..N) and `Ez_k = P_k(Ĉ Ex_k + D̂ Eu_k)` (k = 0..N−1).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointMeans {
    pub mean_y: Vec<DVector<f64>>,
    pub mean_z: Vec<DVector<f64>>,
}

/// Per-path adjoint values: `y` has columns `0..=N`, `z` has `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointPath {
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

fn check_mesh(pseq: &RiccatiSequence, piseq: &RiccatiSequence, means: &MeanTrajectory) -> Result<()> {
    if pseq.mesh() != &means.mesh || piseq.mesh() != &means.mesh {
        return Err(Error::MeshMismatch("Riccati sequences and means use different meshes".into()));
    }
    Ok(())
}

pub fn reconstruct_means(
    p: &Problem,
    pseq: &RiccatiSequence,
    piseq: &RiccatiSequence,
    means: &MeanTrajectory,
) -> Result<AdjointMeans> {
    check_mesh(pseq, piseq, means)?;
    let hat = p.hat();
    let mean_y = means
        .mean_x
        .iter()
        .enumerate()
        .map(|(k, ex)| piseq.get(k).as_matrix() * ex)
        .collect();
    let mean_z = means
        .mean_u
        .iter()
        .enumerate()
        .map(|(k, eu)| pseq.get(k).as_matrix() * (&hat.c * &means.mean_x[k] + &hat.d * eu))
        .collect();
    Ok(AdjointMeans { mean_y, mean_z })
}

/// ```text
/// y_k = W_k(x_k − Ex_k) + Ey_k                         W = P or Π per `weight`
/// z_k = P_k(C(x_k − Ex_k) + D(u_k − Eu_k)) + Ez_k
/// ```
pub fn reconstruct_path(
    p: &Problem,
    pseq: &RiccatiSequence,
    piseq: &RiccatiSequence,
    means: &MeanTrajectory,
    adjoint_means: &AdjointMeans,
    path: &SimulatedPath,
    weight: YWeight,
) -> Result<AdjointPath> {
    check_mesh(pseq, piseq, means)?;
    let steps = means.mesh.steps();
    if path.x.ncols() != steps + 1 || path.u.ncols() != steps {
        return Err(Error::MeshMismatch("path and means use different meshes".into()));
    }
    let mut y = DMatrix::zeros(p.n, steps + 1);
    let mut z = DMatrix::zeros(p.n, steps);
    for k in 0..=steps {
        let dx = path.x.column(k) - &means.mean_x[k];
        let w = match weight {
            YWeight::P => pseq.get(k),
            YWeight::Pi => piseq.get(k),
        };
        y.set_column(k, &(w.as_matrix() * &dx + &adjoint_means.mean_y[k]));
        if k < steps {
            let du = path.u.column(k) - &means.mean_u[k];
            let zk = pseq.get(k).as_matrix() * (&p.c * &dx + &p.d * du) + &adjoint_means.mean_z[k];
            z.set_column(k, &zk);
        }
    }
    Ok(AdjointPath { y, z })
}
