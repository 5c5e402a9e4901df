//! Counter-based Brownian increments.
//!
//! Fine increment `j` of path `i` is a pure function of `(seed, i, j)`:
//! a splitmix64-style hash gives 64 uniform bits, which are mapped to
//! `(0, 1)` and pushed through the standard normal inverse CDF. Any
//! parallel schedule therefore reproduces the same ensemble, and coarse
//! levels are exact left-to-right block sums of the fine increments.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::mesh::TimeMesh;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const PATH_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const STEP_MUL: u64 = 0xABC9_8388_FB8F_AC03;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn path_key(seed: u64, path_id: u64) -> u64 {
    mix64(mix64(seed.wrapping_add(GOLDEN)) ^ path_id.wrapping_mul(PATH_MUL).wrapping_add(GOLDEN))
}

#[inline]
fn draw_bits(key: u64, j: u64) -> u64 {
    mix64(key ^ j.wrapping_mul(STEP_MUL).wrapping_add(GOLDEN))
}

/// Top 53 bits mapped to the open interval `(0, 1)`.
#[inline]
fn to_open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw `j` of path `path_id`.
pub fn uniform(seed: u64, path_id: u64, j: u64) -> f64 {
    to_open_unit(draw_bits(path_key(seed, path_id), j))
}

/// Standard normal draw `j` of path `path_id`, by inverse CDF.
pub fn standard_normal(seed: u64, path_id: u64, j: u64) -> f64 {
    std_normal().inverse_cdf(uniform(seed, path_id, j))
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Source of coupled Brownian increments on a fine mesh.
#[derive(Debug, Clone, Copy)]
pub struct BrownianSource {
    pub seed: u64,
    pub fine: TimeMesh,
}

impl BrownianSource {
    pub fn new(seed: u64, fine: TimeMesh) -> Self {
        Self { seed, fine }
    }

    /// The `N_fine` i.i.d. `N(0, τ_fine)` increments of one path.
    pub fn fine_increments(&self, path_id: u64) -> Vec<f64> {
        let key = path_key(self.seed, path_id);
        let sd = self.fine.tau().sqrt();
        let normal = std_normal();
        (0..self.fine.steps() as u64)
            .map(|j| sd * normal.inverse_cdf(to_open_unit(draw_bits(key, j))))
            .collect()
    }

    /// Increments on `level`, as block sums of the fine increments.
    pub fn increments(&self, path_id: u64, level: &TimeMesh) -> Result<Vec<f64>> {
        let ratio = self.fine.refinement_of(level)?;
        Ok(coarsen(&self.fine_increments(path_id), ratio))
    }
}

/// Left-to-right block sums of `fine` in blocks of `ratio`.
pub fn coarsen(fine: &[f64], ratio: usize) -> Vec<f64> {
    if ratio == 1 {
        return fine.to_vec();
    }
    fine.chunks(ratio)
        .map(|block| block.iter().fold(0.0, |acc, &v| acc + v))
        .collect()
}

/// Increments of path `(seed, path_id)` on `level`, coupled through `fine`.
pub fn brownian_increments(seed: u64, path_id: u64, fine: &TimeMesh, level: &TimeMesh) -> Result<Vec<f64>> {
    if level.steps() > fine.steps() {
        return Err(Error::MeshMismatch(format!(
            "level N={} is finer than the fine mesh N={}",
            level.steps(),
            fine.steps()
        )));
    }
    BrownianSource::new(seed, *fine).increments(path_id, level)
}
