use crate::error::{Error, Result};

/// Uniform partition of `[0, T]` into `N` steps of size `τ = T / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMesh {
    steps: usize,
    horizon: f64,
}

impl TimeMesh {
    /// Requires `N ≥ 1`, `T > 0` finite and `τ ≤ 1`.
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidMesh("number of steps must be positive".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidMesh(format!("horizon must be positive, got {horizon}")));
        }
        if horizon / steps as f64 > 1.0 {
            return Err(Error::InvalidMesh(format!(
                "step size T/N = {} exceeds 1",
                horizon / steps as f64
            )));
        }
        Ok(Self { steps, horizon })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn tau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid point `t_k = k τ`; `t_N` is exactly `T`.
    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.tau()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.t(k))
    }

    /// Left-endpoint index `floor(t / τ)` clamped to `N - 1`.
    pub fn left_index(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let k = (t / self.tau()).floor() as usize;
        k.min(self.steps - 1)
    }

    /// Index of the grid point nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        ((t / self.tau()).round() as usize).min(self.steps)
    }

    /// Ratio `self.N / coarse.N` when `coarse` is nested in `self`.
    pub fn refinement_of(&self, coarse: &TimeMesh) -> Result<usize> {
        let same_horizon = (self.horizon - coarse.horizon).abs() <= 1e-14 * self.horizon.max(1.0);
        if !same_horizon || !self.steps.is_multiple_of(coarse.steps) {
            return Err(Error::MeshMismatch(format!(
                "mesh with N={} on [0,{}] is not nested in N={} on [0,{}]",
                coarse.steps, coarse.horizon, self.steps, self.horizon
            )));
        }
        Ok(self.steps / coarse.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let m = TimeMesh::new(1.0, 8).unwrap();
        assert_eq!(m.t(0), 0.0);
        assert_eq!(m.t(8), 1.0);
        assert_eq!(m.tau(), 0.125);
        assert_eq!(m.points().count(), 9);
    }

    #[test]
    fn left_index_clamps() {
        let m = TimeMesh::new(1.0, 4).unwrap();
        assert_eq!(m.left_index(0.0), 0);
        assert_eq!(m.left_index(0.26), 1);
        assert_eq!(m.left_index(0.5), 2);
        assert_eq!(m.left_index(1.0), 3);
    }

    #[test]
    fn rejects_bad_meshes() {
        assert!(TimeMesh::new(1.0, 0).is_err());
        assert!(TimeMesh::new(-1.0, 4).is_err());
        assert!(TimeMesh::new(4.0, 2).is_err());
    }

    #[test]
    fn nesting() {
        let fine = TimeMesh::new(1.0, 16).unwrap();
        assert_eq!(fine.refinement_of(&TimeMesh::new(1.0, 4).unwrap()).unwrap(), 4);
        assert!(fine.refinement_of(&TimeMesh::new(1.0, 3).unwrap()).is_err());
        assert!(fine.refinement_of(&TimeMesh::new(0.5, 4).unwrap()).is_err());
    }
}
