//! Loss and embedding-quality reporting.

use rayon::prelude::*;

use crate::affinity::{self, AffinityFlavor, SparseAffinity};
use crate::barneshut::{bh_repulsion, SpatialTree};
use crate::data::DataMatrix;
use crate::embedding::EmbeddingState;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// How the global normalizer `z` is computed for the divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlMode {
    /// Dense O(N^2) sum.
    Exact,
    /// One tree traversal per point with the given opening parameter.
    BhApprox { bh_theta: f64 },
}

impl KlMode {
    fn label(&self) -> &'static str {
        match self {
            KlMode::Exact => "EXACT",
            KlMode::BhApprox { .. } => "BH_APPROX",
        }
    }
}

/// One loss measurement. With a kNN-truncated affinity the sum runs over the
/// sparse support only, so the value is a restricted divergence rather than
/// a true Kullback-Leibler divergence; it can dip slightly below zero.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub iteration: usize,
    pub kl_value: f64,
    pub mode: &'static str,
    /// Global normalizer `z = sum_{k != l} (1 + |y_k - y_l|^2)^-1`.
    pub z: f64,
}

impl LossReport {
    /// CSV serialization: `iteration,kl_value,mode`.
    pub fn to_csv_line(&self) -> String {
        format!("{},{},{}", self.iteration, self.kl_value, self.mode)
    }
}

/// Kullback-Leibler divergence `sum P_ij ln(P_ij / Q_ij)` over the nonzero
/// entries of `p`, with `Q_ij = (1 + r_ij^2)^-1 / z`.
pub fn kl_divergence(
    p: &SparseAffinity,
    state: &EmbeddingState,
    mode: KlMode,
) -> Result<LossReport> {
    if p.flavor() != AffinityFlavor::SymmetrizedP {
        return Err(Error::Parameter(
            "divergence is defined against the symmetrized affinity".into(),
        ));
    }
    let n = state.n();
    if p.n() != n {
        return Err(Error::Parameter(format!(
            "affinity has {} rows but embedding has {} points",
            p.n(),
            n
        )));
    }
    if n < 2 {
        return Err(Error::Parameter("need at least 2 points".into()));
    }

    let dim = state.dim();
    let positions = state.positions();

    // Per-point partial sums combined in index order, so the result is
    // independent of the thread partitioning.
    let mut partials = vec![0.0; n];
    match mode {
        KlMode::Exact => {
            partials.par_iter_mut().enumerate().for_each(|(i, out)| {
                let yi = &positions[i * dim..i * dim + dim];
                let mut s = 0.0;
                for (j, yj) in positions.chunks_exact(dim).enumerate() {
                    if j == i {
                        continue;
                    }
                    let mut r2 = 0.0;
                    for a in 0..dim {
                        let t = yj[a] - yi[a];
                        r2 += t * t;
                    }
                    s += 1.0 / (1.0 + r2);
                }
                *out = s;
            });
        }
        KlMode::BhApprox { bh_theta } => {
            let tree = SpatialTree::build(positions, dim)?;
            // The repulsion kernel is irrelevant for the denominator sum.
            let psi2 = KernelSpec::polynomial(2.0);
            partials.par_iter_mut().enumerate().for_each(|(i, out)| {
                let yi = &positions[i * dim..i * dim + dim];
                *out = bh_repulsion(&tree, yi, Some(i), bh_theta, &psi2).denom;
            });
        }
    }
    let z: f64 = partials.iter().sum();

    let mut kl_parts = vec![0.0; n];
    kl_parts.par_iter_mut().enumerate().for_each(|(i, out)| {
        let yi = &positions[i * dim..i * dim + dim];
        let mut acc = 0.0;
        for &(j, p_ij) in p.row(i) {
            if p_ij <= 0.0 {
                continue;
            }
            let yj = &positions[j * dim..j * dim + dim];
            let mut r2 = 0.0;
            for a in 0..dim {
                let t = yj[a] - yi[a];
                r2 += t * t;
            }
            let q_ij = 1.0 / (1.0 + r2) / z;
            acc += p_ij * (p_ij / q_ij).ln();
        }
        *out = acc;
    });
    let kl_value: f64 = kl_parts.iter().sum();

    Ok(LossReport {
        iteration: state.iteration(),
        kl_value,
        mode: mode.label(),
        z,
    })
}

/// Fraction of each point's `k` nearest data-space neighbors that are also
/// among its `k` nearest embedding-space neighbors, averaged over points.
/// 1 means the embedding preserves every local neighborhood.
pub fn neighbor_preservation(
    data: &DataMatrix,
    state: &EmbeddingState,
    k: usize,
) -> Result<f64> {
    let n = data.n();
    if state.n() != n {
        return Err(Error::Parameter(format!(
            "embedding has {} points but data has {n}",
            state.n()
        )));
    }
    let data_graph = affinity::knn_search(data, k)?;
    let embed_matrix = DataMatrix::new(state.positions().to_vec(), n, state.dim())?;
    let embed_graph = affinity::knn_search(&embed_matrix, k)?;

    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut a: Vec<usize> = data_graph.neighbors(i).iter().map(|&(j, _)| j).collect();
            let mut b: Vec<usize> = embed_graph.neighbors(i).iter().map(|&(j, _)| j).collect();
            a.sort_unstable();
            b.sort_unstable();
            let mut overlap = 0usize;
            let (mut ia, mut ib) = (0, 0);
            while ia < a.len() && ib < b.len() {
                match a[ia].cmp(&b[ib]) {
                    std::cmp::Ordering::Less => ia += 1,
                    std::cmp::Ordering::Greater => ib += 1,
                    std::cmp::Ordering::Equal => {
                        overlap += 1;
                        ia += 1;
                        ib += 1;
                    }
                }
            }
            overlap as f64 / k as f64
        })
        .sum();
    Ok(total / n as f64)
}
