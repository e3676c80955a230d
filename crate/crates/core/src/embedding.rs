//! Low-dimensional embedding state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Positions of the `n` embedded points in `dim`-dimensional space (2 or 3),
/// stored row-major, together with the iteration counter and the seed that
/// produced the initial configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    positions: Vec<f64>,
    n: usize,
    dim: usize,
    iteration: usize,
    seed: u64,
}

impl EmbeddingState {
    /// Draws the initial positions i.i.d. uniform on `[0, 1]^dim` from a
    /// seeded ChaCha8 generator. The generator algorithm and the row-major
    /// draw order are fixed, so the same seed reproduces the same
    /// configuration on every platform.
    pub fn new_uniform(n: usize, dim: usize, seed: u64) -> Result<Self> {
        check_shape(n, dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = (0..n * dim).map(|_| rng.random::<f64>()).collect();
        Ok(Self {
            positions,
            n,
            dim,
            iteration: 0,
            seed,
        })
    }

    /// Wraps externally supplied positions, validating shape and finiteness.
    pub fn from_positions(
        positions: Vec<f64>,
        n: usize,
        dim: usize,
        iteration: usize,
        seed: u64,
    ) -> Result<Self> {
        check_shape(n, dim)?;
        if positions.len() != n * dim {
            return Err(Error::Parameter(format!(
                "position buffer length {} does not match {n} x {dim}",
                positions.len()
            )));
        }
        if let Some(bad) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup {
                iteration,
                point: bad / dim,
            });
        }
        Ok(Self {
            positions,
            n,
            dim,
            iteration,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Successor state after one iteration, validating that every coordinate
    /// stayed finite. The blowup error reports the iteration that produced
    /// the bad positions and the first offending point.
    pub(crate) fn advanced(&self, positions: Vec<f64>) -> Result<Self> {
        debug_assert_eq!(positions.len(), self.positions.len());
        if let Some(bad) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup {
                iteration: self.iteration,
                point: bad / self.dim,
            });
        }
        Ok(Self {
            positions,
            n: self.n,
            dim: self.dim,
            iteration: self.iteration + 1,
            seed: self.seed,
        })
    }

    /// Spatial diameter: the maximum pairwise Euclidean distance.
    pub fn diameter(&self) -> f64 {
        let mut max_sq = 0.0f64;
        for i in 0..self.n {
            let yi = self.point(i);
            for j in (i + 1)..self.n {
                let yj = self.point(j);
                let mut d = 0.0;
                for a in 0..self.dim {
                    let t = yi[a] - yj[a];
                    d += t * t;
                }
                max_sq = max_sq.max(d);
            }
        }
        max_sq.sqrt()
    }
}

fn check_shape(n: usize, dim: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::Parameter("need at least one point".into()));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::Parameter(format!(
            "embedding dimension must be 2 or 3, got {dim}"
        )));
    }
    Ok(())
}
