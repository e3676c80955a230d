//! High-dimensional similarity structure: exact kNN graphs, per-point
//! bandwidth calibration to a target perplexity, symmetrization, and
//! total-influence row normalization.
//!
//! Conditional probabilities normalize over each point's neighbor list
//! (not over all points), so the sparse rows are proper distributions on
//! their own support.

use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Absolute tolerance on the realized perplexity `2^H` of a calibrated row.
pub const PERPLEXITY_TOL: f64 = 1e-4;
/// Doubling/halving steps allowed while bracketing the bandwidth.
const BRACKET_CAP: usize = 64;
/// Bisection iterations allowed after bracketing.
const BISECT_CAP: usize = 200;

/// Exact k-nearest-neighbor graph: for each point, its `k` nearest neighbors
/// by Euclidean distance with squared distances, sorted ascending. Ties are
/// broken toward the lower point index.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    lists: Vec<Vec<(usize, f64)>>,
    k: usize,
}

impl NeighborGraph {
    pub fn n(&self) -> usize {
        self.lists.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Neighbors of point `i` as `(index, squared distance)`, ascending.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.lists[i]
    }
}

/// Per-row conditional probabilities over each point's neighbor list, plus
/// the calibrated Gaussian bandwidth of every row.
#[derive(Debug, Clone)]
pub struct ConditionalAffinity {
    rows: Vec<Vec<(usize, f64)>>,
    sigmas: Vec<f64>,
}

impl ConditionalAffinity {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }
}

/// Which normalization a sparse affinity matrix carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffinityFlavor {
    /// `P_ij = (p_{i|j} + p_{j|i}) / 2N`; symmetric, total mass 1.
    SymmetrizedP,
    /// Rows of the symmetrized matrix divided by their sums; each row sums
    /// to 1 (the total-influence normalization driving the attraction term).
    RowNormalizedPTilde,
}

/// Row-indexed sparse affinity matrix with zero diagonal. Row entries are
/// sorted by column index.
#[derive(Debug, Clone)]
pub struct SparseAffinity {
    rows: Vec<Vec<(usize, f64)>>,
    flavor: AffinityFlavor,
}

impl SparseAffinity {
    /// Builds a sparse affinity from per-row `(column, value)` lists.
    /// Entries are sorted by column; the diagonal must be absent and all
    /// values finite and nonnegative.
    pub fn from_rows(
        mut rows: Vec<Vec<(usize, f64)>>,
        flavor: AffinityFlavor,
    ) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut prev = usize::MAX;
            for &(j, v) in row.iter() {
                if j == i {
                    return Err(Error::Parameter(format!(
                        "row {i} carries a diagonal entry"
                    )));
                }
                if j >= n {
                    return Err(Error::Parameter(format!(
                        "row {i} references column {j}, but there are {n} points"
                    )));
                }
                if j == prev {
                    return Err(Error::Parameter(format!(
                        "row {i} has duplicate entries for column {j}"
                    )));
                }
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Parameter(format!(
                        "row {i} has invalid value {v} at column {j}"
                    )));
                }
                prev = j;
            }
        }
        Ok(Self { rows, flavor })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn flavor(&self) -> AffinityFlavor {
        self.flavor
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, v)| v).sum()
    }

    pub fn total_sum(&self) -> f64 {
        (0..self.n()).map(|i| self.row_sum(i)).sum()
    }

    /// Value at `(i, j)`, zero when outside the sparsity pattern.
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by(|&(c, _)| c.cmp(&j)) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }
}

/// Query rows handled per distance block.
const KNN_BLOCK: usize = 64;

/// Exact k-nearest-neighbor search under Euclidean distance.
///
/// Squared distances are computed blockwise as
/// `|x_i|^2 + |x_j|^2 - 2 x_i . x_j`, with the dot products evaluated by a
/// blocked matrix product so large inputs stay cache-friendly. Candidates
/// are compared as `(d^2, index)` pairs, so ties resolve toward the lower
/// index. Each query row is an independent computation; results do not
/// depend on the thread count.
pub fn knn_search(data: &DataMatrix, k: usize) -> Result<NeighborGraph> {
    let n = data.n();
    let d = data.d_in();
    if k < 1 || k > n - 1 {
        return Err(Error::Parameter(format!(
            "k = {k} out of range [1, {}]",
            n - 1
        )));
    }

    let values = data.values();
    let norms: Vec<f64> = (0..n)
        .map(|i| data.row(i).iter().map(|v| v * v).sum())
        .collect();

    let n_blocks = n.div_ceil(KNN_BLOCK);
    let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    lists
        .par_chunks_mut(KNN_BLOCK)
        .enumerate()
        .for_each(|(block, out)| {
            let start = block * KNN_BLOCK;
            let rows = out.len();
            let mut dots = vec![0.0f64; rows * n];
            // dots = X[start..start+rows] * X^T
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    d,
                    n,
                    1.0,
                    values.as_ptr().add(start * d),
                    d as isize,
                    1,
                    values.as_ptr(),
                    1,
                    d as isize,
                    0.0,
                    dots.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
            let cmp =
                |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            for (r, list) in out.iter_mut().enumerate() {
                let i = start + r;
                let row_dots = &dots[r * n..(r + 1) * n];
                let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let sq = (norms[i] + norms[j] - 2.0 * row_dots[j]).max(0.0);
                    cand.push((sq, j));
                }
                if k < cand.len() {
                    cand.select_nth_unstable_by(k - 1, cmp);
                    cand.truncate(k);
                }
                cand.sort_unstable_by(cmp);
                // Copy into a right-sized buffer; reusing the candidate
                // allocation would pin n-sized capacity per row.
                let mut row = Vec::with_capacity(cand.len());
                row.extend(cand.iter().map(|&(sq, j)| (j, sq)));
                *list = row;
            }
        });
    debug_assert_eq!(n_blocks, lists.chunks(KNN_BLOCK).count());

    Ok(NeighborGraph { lists, k })
}

/// Gaussian row probabilities and their entropy at inverse-bandwidth `beta`.
///
/// `probs_j` is proportional to `exp(-beta * sq_dists_j)`, normalized to sum
/// to one; the exponent is shifted by the smallest squared distance before
/// exponentiation so the normalizer never underflows to zero. Returns the
/// entropy `H = -sum p log2 p` in bits together with the probabilities.
pub fn row_entropy_probs(sq_dists: &[f64], beta: f64) -> Result<(f64, Vec<f64>)> {
    let mut probs = vec![0.0; sq_dists.len()];
    let h = row_entropy_into(sq_dists, beta, &mut probs)?;
    Ok((h, probs))
}

/// Allocation-free variant of [`row_entropy_probs`] used by the calibration
/// loop. `probs` must have the same length as `sq_dists`.
fn row_entropy_into(sq_dists: &[f64], beta: f64, probs: &mut [f64]) -> Result<f64> {
    if sq_dists.is_empty() {
        return Err(Error::Parameter("empty squared-distance list".into()));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Parameter(format!("beta = {beta} must be >= 0")));
    }
    debug_assert_eq!(sq_dists.len(), probs.len());

    let shift = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0; // sum of e_j * (d_j - shift)
    for (p, &d) in probs.iter_mut().zip(sq_dists) {
        let delta = d - shift;
        let e = (-beta * delta).exp();
        *p = e;
        sum += e;
        weighted += e * delta;
    }
    // H in nats is ln(sum) + beta * <delta>; convert to bits.
    let h = (sum.ln() + beta * weighted / sum) / std::f64::consts::LN_2;
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(h.max(0.0))
}

/// Calibrates the Gaussian bandwidth of one row so that the realized
/// perplexity `2^H` matches `target_perplexity` within [`PERPLEXITY_TOL`].
///
/// The search runs on `beta = 1 / (2 sigma^2)`, along which the perplexity is
/// monotone decreasing: starting from `beta = 1`, the bracket is expanded by
/// doubling or halving (at most 64 times), then bisected (at most 200
/// iterations). If the tolerance is still not met at the cap — e.g. the
/// target is unreachable because the neighbor distances are all equal — the
/// closer endpoint is returned and a warning is logged.
pub fn calibrate_bandwidth(
    sq_dists: &[f64],
    target_perplexity: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut probs = vec![0.0; sq_dists.len()];
    let beta = calibrate_beta(sq_dists, target_perplexity, &mut probs)?;
    Ok(((1.0 / (2.0 * beta)).sqrt(), probs))
}

/// Core calibration loop; returns the calibrated `beta` and fills `probs`.
fn calibrate_beta(sq_dists: &[f64], target: f64, probs: &mut [f64]) -> Result<f64> {
    if sq_dists.is_empty() {
        return Err(Error::Parameter("empty squared-distance list".into()));
    }
    let len = sq_dists.len() as f64;
    if !(1.0..=len).contains(&target) {
        return Err(Error::Parameter(format!(
            "target perplexity {target} outside [1, {len}] for a {}-neighbor row",
            sq_dists.len()
        )));
    }

    let perp = |beta: f64, probs: &mut [f64]| -> Result<f64> {
        let h = row_entropy_into(sq_dists, beta, probs)?;
        Ok(h.exp2())
    };

    let mut beta = 1.0;
    let mut p = perp(beta, probs)?;
    if (p - target).abs() <= PERPLEXITY_TOL {
        return Ok(beta);
    }

    // Perplexity decreases with beta: p > target needs larger beta.
    let (mut lo, mut hi, mut p_lo, mut p_hi) = if p > target {
        let mut hi = beta;
        let mut p_hi = p;
        let mut expansions = 0;
        while p_hi > target && expansions < BRACKET_CAP {
            beta = hi;
            p = p_hi;
            hi *= 2.0;
            p_hi = perp(hi, probs)?;
            expansions += 1;
        }
        (beta, hi, p, p_hi)
    } else {
        let mut lo = beta;
        let mut p_lo = p;
        let mut expansions = 0;
        while p_lo < target && expansions < BRACKET_CAP {
            beta = lo;
            p = p_lo;
            lo /= 2.0;
            p_lo = perp(lo, probs)?;
            expansions += 1;
        }
        (lo, beta, p_lo, p)
    };

    for _ in 0..BISECT_CAP {
        let mid = 0.5 * (lo + hi);
        let p_mid = perp(mid, probs)?;
        if (p_mid - target).abs() <= PERPLEXITY_TOL {
            return Ok(mid);
        }
        if p_mid > target {
            lo = mid;
            p_lo = p_mid;
        } else {
            hi = mid;
            p_hi = p_mid;
        }
    }

    // Iteration cap hit: fall back to the closer endpoint.
    let beta = if (p_lo - target).abs() <= (p_hi - target).abs() {
        lo
    } else {
        hi
    };
    let realized = perp(beta, probs)?;
    log::warn!(
        "bandwidth calibration hit the iteration cap: realized perplexity \
         {realized:.6} vs target {target} (returning closer endpoint)"
    );
    Ok(beta)
}

/// Calibrates every row of the neighbor graph to `perplexity`, producing the
/// conditional affinity rows and per-point bandwidths.
pub fn build_conditional(graph: &NeighborGraph, perplexity: f64) -> Result<ConditionalAffinity> {
    if perplexity > graph.k() as f64 {
        return Err(Error::Parameter(format!(
            "perplexity {perplexity} exceeds neighbor count k = {}",
            graph.k()
        )));
    }

    let calibrated = (0..graph.n())
        .into_par_iter()
        .map(|i| {
            let list = graph.neighbors(i);
            let sq: Vec<f64> = list.iter().map(|&(_, d)| d).collect();
            let (sigma, probs) = calibrate_bandwidth(&sq, perplexity)
                .map_err(|e| Error::Data(format!("row {i}: {e}")))?;
            let row: Vec<(usize, f64)> = list
                .iter()
                .zip(&probs)
                .map(|(&(j, _), &p)| (j, p))
                .collect();
            Ok((row, sigma))
        })
        .collect::<Result<Vec<_>>>()?;

    let (rows, sigmas) = calibrated.into_iter().unzip();
    Ok(ConditionalAffinity { rows, sigmas })
}

/// Symmetrizes conditional affinities: `P_ij = (p_{i|j} + p_{j|i}) / 2N` on
/// the union of the two neighbor lists. The result has total mass 1.
pub fn symmetrize(cond: &ConditionalAffinity, n: usize) -> Result<SparseAffinity> {
    if cond.n() != n {
        return Err(Error::Parameter(format!(
            "conditional affinity has {} rows, expected {n}",
            cond.n()
        )));
    }

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in cond.rows.iter().enumerate() {
        for &(j, p) in row {
            rows[i].push((j, p));
            rows[j].push((i, p));
        }
    }

    let scale = 1.0 / (2.0 * n as f64);
    rows.par_iter_mut().for_each(|row| {
        row.sort_unstable_by_key(|&(j, _)| j);
        let mut out = 0;
        let mut idx = 0;
        while idx < row.len() {
            let (j, mut v) = row[idx];
            idx += 1;
            // At most two entries share a column: p_{j|i} and p_{i|j}.
            while idx < row.len() && row[idx].0 == j {
                v += row[idx].1;
                idx += 1;
            }
            row[out] = (j, v * scale);
            out += 1;
        }
        row.truncate(out);
    });

    Ok(SparseAffinity {
        rows,
        flavor: AffinityFlavor::SymmetrizedP,
    })
}

/// Divides each row by its sum, producing the total-influence-normalized
/// matrix whose rows each sum to 1. The sparsity pattern is preserved.
pub fn row_normalize(p: &SparseAffinity) -> Result<SparseAffinity> {
    let mut rows = p.rows.clone();
    for (i, row) in rows.iter_mut().enumerate() {
        let sum: f64 = row.iter().map(|&(_, v)| v).sum();
        if sum <= 0.0 {
            return Err(Error::Data(format!(
                "point {i} is isolated: affinity row sums to zero"
            )));
        }
        for (_, v) in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(SparseAffinity {
        rows,
        flavor: AffinityFlavor::RowNormalizedPTilde,
    })
}

/// Neighbor count used when only a perplexity is specified: `3 * perplexity`
/// rounded up, clamped to `n - 1`.
pub fn default_neighbor_count(n: usize, perplexity: f64) -> usize {
    ((3.0 * perplexity).ceil() as usize).clamp(1, n - 1)
}
