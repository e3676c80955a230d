//! Exact attraction-repulsion swarming iteration, the gradient-descent
//! baseline it generalizes, and diagnostic quantities.
//!
//! One swarming step moves every point by the total-influence-normalized
//! forces
//!
//! ```text
//! y_i <- y_i + h * [ alpha * sum_j Ptilde_ij psi1(r_ij) (y_j - y_i)
//!                  -         sum_j Qtilde_ij psi2(r_ij) (y_j - y_i) ]
//! ```
//!
//! where `Ptilde` is the row-normalized input affinity, `Qtilde_ij =
//! (1 + r_ij^2)^-1 / sum_k (1 + r_ik^2)^-1` is the row-normalized embedding
//! similarity recomputed each step, and `alpha > 1` only during the early
//! exaggeration phase. All forces for one step read the same position
//! snapshot (double buffering), and every point's accumulation runs in a
//! fixed serial order, so results are identical at any thread count.

use rayon::prelude::*;

use crate::affinity::{AffinityFlavor, SparseAffinity};
use crate::embedding::EmbeddingState;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Largest point count for which dense diagnostic matrices are produced.
pub const COLLECTIVE_CAP: usize = 4096;

/// Which engine computes the repulsion term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Dense pairwise sums, O(N^2) per iteration.
    Exact,
    /// Tree-approximated repulsion, O(N log N) per iteration.
    BarnesHut,
}

/// Optional gradient-descent baseline run instead of the swarming dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    None,
    /// Plain Kullback-Leibler gradient descent.
    TsneVanilla,
    /// Gradient descent with per-coordinate delta-bar-delta rates.
    TsneDbd,
}

/// Which early-exaggeration update runs while `iteration < ee_iters`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExaggerationForm {
    /// Amplify the normalized attraction term of the swarming step.
    Normalized,
    /// Run the (unnormalized) gradient-descent update with amplified
    /// attraction during the exaggeration phase, then switch to the
    /// swarming dynamics. Useful for like-for-like comparisons against the
    /// gradient-descent baseline from a shared initialization.
    TsneStyle,
}

/// Full parameter set for one embedding run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Step size; the dynamics are normalized so 1 works at any data size.
    pub h: f64,
    /// Early-exaggeration factor (>= 1; 1 disables).
    pub alpha: f64,
    /// Iterations that use the exaggerated attraction.
    pub ee_iters: usize,
    pub total_iters: usize,
    pub attraction: KernelSpec,
    pub repulsion: KernelSpec,
    pub engine: Engine,
    /// Barnes-Hut opening parameter; cells with `max_side / distance <
    /// bh_theta` act as single pseudo-particles. 0 disables approximation.
    pub bh_theta: f64,
    pub baseline: Baseline,
    pub ee_form: ExaggerationForm,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            h: 1.0,
            alpha: 10.0,
            ee_iters: 250,
            total_iters: 1000,
            attraction: KernelSpec::polynomial(2.0),
            repulsion: KernelSpec::polynomial(3.0),
            engine: Engine::BarnesHut,
            bh_theta: 0.5,
            baseline: Baseline::None,
            ee_form: ExaggerationForm::Normalized,
        }
    }
}

impl RunConfig {
    /// Checks parameter ranges. A heavier-tailed repulsion than attraction
    /// (`theta2 < theta1`) is known to prevent cluster formation, but stays
    /// allowed so the failure mode can be reproduced; it only logs a warning.
    pub fn validate(&self) -> Result<()> {
        if !self.h.is_finite() || self.h <= 0.0 {
            return Err(Error::Parameter(format!("step size must be positive, got {}", self.h)));
        }
        if !self.alpha.is_finite() || self.alpha < 1.0 {
            return Err(Error::Parameter(format!(
                "exaggeration factor must be >= 1, got {}",
                self.alpha
            )));
        }
        if self.ee_iters > self.total_iters {
            return Err(Error::Parameter(format!(
                "ee_iters {} exceeds total_iters {}",
                self.ee_iters, self.total_iters
            )));
        }
        if !self.bh_theta.is_finite() || self.bh_theta < 0.0 {
            return Err(Error::Parameter(format!(
                "bh_theta must be >= 0, got {}",
                self.bh_theta
            )));
        }
        self.attraction.validate()?;
        self.repulsion.validate()?;
        if let (KernelSpec::Polynomial { theta: t1 }, KernelSpec::Polynomial { theta: t2 }) =
            (self.attraction, self.repulsion)
        {
            if t2 < t1 {
                log::warn!(
                    "repulsion exponent {t2} is smaller than attraction exponent {t1}; \
                     long-range repulsion dominates and clusters may fail to form"
                );
            }
        }
        Ok(())
    }

    /// Exaggeration factor in effect at the given iteration.
    pub fn alpha_at(&self, iteration: usize) -> f64 {
        if iteration < self.ee_iters {
            self.alpha
        } else {
            1.0
        }
    }
}

/// One row of the normalized embedding similarity: `Qtilde_ij` for all
/// `j != i` (the `i`-th entry is zero) and the row denominator
/// `S_i = sum_{k != i} (1 + |y_i - y_k|^2)^-1`.
pub fn q_tilde_row(state: &EmbeddingState, i: usize) -> Result<(Vec<f64>, f64)> {
    let n = state.n();
    if n < 2 {
        return Err(Error::Parameter("need at least 2 points".into()));
    }
    if i >= n {
        return Err(Error::Parameter(format!("index {i} out of range for {n} points")));
    }
    let yi = state.point(i);
    let mut row = vec![0.0; n];
    let mut denom = 0.0;
    for (j, slot) in row.iter_mut().enumerate() {
        if j == i {
            continue;
        }
        let q = 1.0 / (1.0 + sq_dist(yi, state.point(j)));
        *slot = q;
        denom += q;
    }
    for v in row.iter_mut() {
        *v /= denom;
    }
    Ok((row, denom))
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// One exact swarming step (dense repulsion over all pairs, attraction over
/// the sparse support of `p_tilde`). Exaggeration multiplies the attraction
/// term only, while `state.iteration() < cfg.ee_iters`.
pub fn ars_step_exact(
    state: &EmbeddingState,
    p_tilde: &SparseAffinity,
    cfg: &RunConfig,
) -> Result<EmbeddingState> {
    check_p_tilde(state, p_tilde)?;
    let alpha = cfg.alpha_at(state.iteration());
    let new_positions = match state.dim() {
        2 => step_exact_dim::<2>(state, p_tilde, cfg, alpha),
        3 => step_exact_dim::<3>(state, p_tilde, cfg, alpha),
        _ => unreachable!("dimension validated at construction"),
    };
    state.advanced(new_positions)
}

fn step_exact_dim<const D: usize>(
    state: &EmbeddingState,
    p_tilde: &SparseAffinity,
    cfg: &RunConfig,
    alpha: f64,
) -> Vec<f64> {
    let n = state.n();
    let positions = state.positions();
    let psi1 = cfg.attraction;
    let psi2 = cfg.repulsion;
    let h = cfg.h;

    let mut out = vec![0.0; n * D];
    out.par_chunks_mut(D).enumerate().for_each(|(i, out_i)| {
        let yi: &[f64] = &positions[i * D..i * D + D];
        // First pass: the total influence S_i normalizing this row of Qtilde.
        let mut s_i = 0.0;
        for (j, yj) in positions.chunks_exact(D).enumerate() {
            if j == i {
                continue;
            }
            let mut r2 = 0.0;
            for a in 0..D {
                let t = yj[a] - yi[a];
                r2 += t * t;
            }
            s_i += 1.0 / (1.0 + r2);
        }

        // Second pass: accumulate Qtilde_ij psi2(r_ij) (y_j - y_i) term by
        // term, so equal attraction and repulsion kernels cancel exactly.
        let mut rep = [0.0; D];
        for (j, yj) in positions.chunks_exact(D).enumerate() {
            if j == i {
                continue;
            }
            let mut r2 = 0.0;
            for a in 0..D {
                let t = yj[a] - yi[a];
                r2 += t * t;
            }
            let q_tilde = 1.0 / (1.0 + r2) / s_i;
            let w = q_tilde * psi2.eval_sq(r2);
            for a in 0..D {
                rep[a] += w * (yj[a] - yi[a]);
            }
        }

        let mut attr = [0.0; D];
        for &(j, v) in p_tilde.row(i) {
            let yj = &positions[j * D..j * D + D];
            let mut r2 = 0.0;
            for a in 0..D {
                let t = yj[a] - yi[a];
                r2 += t * t;
            }
            let w = v * psi1.eval_sq(r2);
            for a in 0..D {
                attr[a] += w * (yj[a] - yi[a]);
            }
        }

        for a in 0..D {
            out_i[a] = yi[a] + h * (alpha * attr[a] - rep[a]);
        }
    });
    out
}

/// Per-coordinate delta-bar-delta learning rates for the gradient-descent
/// baseline: a rate grows additively by `kappa` while the smoothed gradient
/// keeps its sign and shrinks by the factor `1 - phi` when the sign flips.
#[derive(Debug, Clone)]
pub struct AdaptiveRateState {
    rates: Vec<f64>,
    smoothed: Vec<f64>,
    kappa: f64,
    phi: f64,
    theta_s: f64,
}

impl AdaptiveRateState {
    /// Rates start at `initial_rate` with the default parameters
    /// `kappa = 0.2`, `phi = 0.2`, `theta_s = 0.7`.
    pub fn new(n_coords: usize, initial_rate: f64) -> Result<Self> {
        Self::with_params(n_coords, initial_rate, 0.2, 0.2, 0.7)
    }

    pub fn with_params(
        n_coords: usize,
        initial_rate: f64,
        kappa: f64,
        phi: f64,
        theta_s: f64,
    ) -> Result<Self> {
        if !(initial_rate.is_finite() && initial_rate > 0.0) {
            return Err(Error::Parameter(format!(
                "initial rate must be positive, got {initial_rate}"
            )));
        }
        if !(kappa > 0.0 && (0.0..1.0).contains(&phi) && phi > 0.0) {
            return Err(Error::Parameter(format!(
                "need kappa > 0 and phi in (0,1), got kappa={kappa}, phi={phi}"
            )));
        }
        if !(0.0..1.0).contains(&theta_s) || theta_s == 0.0 {
            return Err(Error::Parameter(format!(
                "smoothing factor must be in (0,1), got {theta_s}"
            )));
        }
        Ok(Self {
            rates: vec![initial_rate; n_coords],
            smoothed: vec![0.0; n_coords],
            kappa,
            phi,
            theta_s,
        })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Feeds this iteration's raw gradient: updates every rate from the
    /// sign of `smoothed_prev * gradient`, then folds the gradient into the
    /// smoothed average. Returns the rates to use for this step.
    pub fn apply(&mut self, gradient: &[f64]) -> &[f64] {
        debug_assert_eq!(gradient.len(), self.rates.len());
        for ((rate, smoothed), &g) in
            self.rates.iter_mut().zip(self.smoothed.iter_mut()).zip(gradient)
        {
            let prod = *smoothed * g;
            if prod > 0.0 {
                *rate += self.kappa;
            } else if prod < 0.0 {
                *rate *= 1.0 - self.phi;
            }
            *smoothed = (1.0 - self.theta_s) * g + self.theta_s * *smoothed;
        }
        &self.rates
    }
}

/// One gradient-descent step on the Kullback-Leibler objective:
///
/// ```text
/// y_i <- y_i + 4 z h [ alpha * sum_j P_ij Q_ij (y_j - y_i)
///                    -         sum_j Q_ij^2  (y_j - y_i) ]
/// ```
///
/// with `Q_ij = (1 + r_ij^2)^-1 / z` and `z` recomputed from the current
/// positions. When `rate_state` is supplied, `h` is replaced per coordinate
/// by the delta-bar-delta rates fed with the raw gradient.
pub fn tsne_step(
    state: &EmbeddingState,
    p_sym: &SparseAffinity,
    h: f64,
    alpha: f64,
    mut rate_state: Option<&mut AdaptiveRateState>,
) -> Result<EmbeddingState> {
    if p_sym.flavor() != AffinityFlavor::SymmetrizedP {
        return Err(Error::Parameter(
            "gradient-descent step requires the symmetrized affinity".into(),
        ));
    }
    if p_sym.n() != state.n() {
        return Err(Error::Parameter(format!(
            "affinity has {} rows but embedding has {} points",
            p_sym.n(),
            state.n()
        )));
    }
    if state.n() < 2 {
        return Err(Error::Parameter("need at least 2 points".into()));
    }

    let steps = match state.dim() {
        2 => tsne_step_terms::<2>(state, p_sym, alpha),
        3 => tsne_step_terms::<3>(state, p_sym, alpha),
        _ => unreachable!(),
    };

    let positions = state.positions();
    let mut new_positions = vec![0.0; positions.len()];
    match rate_state.take() {
        None => {
            for (out, (y, s)) in new_positions.iter_mut().zip(positions.iter().zip(&steps)) {
                *out = y + h * s;
            }
        }
        Some(rs) => {
            // The raw KL gradient is the negated step direction.
            let gradient: Vec<f64> = steps.iter().map(|s| -s).collect();
            let rates = rs.apply(&gradient);
            for ((out, (y, s)), &rate) in new_positions
                .iter_mut()
                .zip(positions.iter().zip(&steps))
                .zip(rates)
            {
                *out = y + rate * s;
            }
        }
    }
    state.advanced(new_positions)
}

/// Per-coordinate step directions `4 z [alpha sum P Q d - sum Q^2 d]`,
/// excluding the step size.
fn tsne_step_terms<const D: usize>(
    state: &EmbeddingState,
    p_sym: &SparseAffinity,
    alpha: f64,
) -> Vec<f64> {
    let n = state.n();
    let positions = state.positions();

    // Per-point partial sums of the normalizer, combined in index order so
    // the result does not depend on the thread partitioning.
    let mut partials = vec![0.0; n];
    partials.par_iter_mut().enumerate().for_each(|(i, out)| {
        let yi = &positions[i * D..i * D + D];
        let mut s = 0.0;
        for (j, yj) in positions.chunks_exact(D).enumerate() {
            if j == i {
                continue;
            }
            let mut r2 = 0.0;
            for a in 0..D {
                let t = yj[a] - yi[a];
                r2 += t * t;
            }
            s += 1.0 / (1.0 + r2);
        }
        *out = s;
    });
    let z: f64 = partials.iter().sum();

    let mut steps = vec![0.0; n * D];
    steps.par_chunks_mut(D).enumerate().for_each(|(i, out_i)| {
        let yi = &positions[i * D..i * D + D];
        let mut rep = [0.0; D];
        for (j, yj) in positions.chunks_exact(D).enumerate() {
            if j == i {
                continue;
            }
            let mut r2 = 0.0;
            for a in 0..D {
                let t = yj[a] - yi[a];
                r2 += t * t;
            }
            let q = 1.0 / (1.0 + r2);
            let w = q * q;
            for a in 0..D {
                rep[a] += w * (yj[a] - yi[a]);
            }
        }
        let mut attr = [0.0; D];
        for &(j, p) in p_sym.row(i) {
            let yj = &positions[j * D..j * D + D];
            let mut r2 = 0.0;
            for a in 0..D {
                let t = yj[a] - yi[a];
                r2 += t * t;
            }
            let w = p / (1.0 + r2);
            for a in 0..D {
                attr[a] += w * (yj[a] - yi[a]);
            }
        }
        // attr carries P q d = z P Q d; rep carries q^2 d = z^2 Q^2 d.
        for a in 0..D {
            out_i[a] = 4.0 * (alpha * attr[a] - rep[a] / z);
        }
    });
    steps
}

/// Dense matrix of collective force coefficients
/// `alpha_ij = Ptilde_ij psi1(r_ij) - Qtilde_ij psi2(r_ij)` at the current
/// state. The sign of an entry says whether that pair interaction is
/// currently net-attractive or net-repulsive. Diagnostic use only; rows
/// normalize independently, so the matrix is not symmetric.
#[derive(Debug, Clone)]
pub struct CollectiveCoefficients {
    values: Vec<f64>,
    n: usize,
}

impl CollectiveCoefficients {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Smallest off-diagonal coefficient.
    pub fn min_off_diagonal(&self) -> f64 {
        self.off_diagonal().fold(f64::INFINITY, f64::min)
    }

    /// Largest off-diagonal coefficient.
    pub fn max_off_diagonal(&self) -> f64 {
        self.off_diagonal().fold(f64::NEG_INFINITY, f64::max)
    }

    fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.values
            .iter()
            .enumerate()
            .filter(move |(idx, _)| idx / n != idx % n)
            .map(|(_, &v)| v)
    }
}

/// Computes all pairwise collective force coefficients. Capped at
/// [`COLLECTIVE_CAP`] points since the output is dense; sample the point set
/// first for larger instances.
pub fn collective_coefficients(
    state: &EmbeddingState,
    p_tilde: &SparseAffinity,
    cfg: &RunConfig,
) -> Result<CollectiveCoefficients> {
    check_p_tilde(state, p_tilde)?;
    let n = state.n();
    if n > COLLECTIVE_CAP {
        return Err(Error::Parameter(format!(
            "collective coefficients are dense; {n} points exceed the cap of \
             {COLLECTIVE_CAP} - compute them on a sample instead"
        )));
    }

    let psi1 = cfg.attraction;
    let psi2 = cfg.repulsion;
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let yi = state.point(i);
        let mut s_i = 0.0;
        for (j, slot) in row.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let r2 = sq_dist(yi, state.point(j));
            let q = 1.0 / (1.0 + r2);
            *slot = q;
            s_i += q;
        }
        for (j, v) in row.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let r2 = sq_dist(yi, state.point(j));
            *v = -(*v / s_i) * psi2.eval_sq(r2);
        }
        for &(j, p) in p_tilde.row(i) {
            let r2 = sq_dist(yi, state.point(j));
            row[j] += p * psi1.eval_sq(r2);
        }
    });

    Ok(CollectiveCoefficients { values, n })
}

fn check_p_tilde(state: &EmbeddingState, p_tilde: &SparseAffinity) -> Result<()> {
    if p_tilde.flavor() != AffinityFlavor::RowNormalizedPTilde {
        return Err(Error::Parameter(
            "swarming step requires the row-normalized affinity".into(),
        ));
    }
    if p_tilde.n() != state.n() {
        return Err(Error::Parameter(format!(
            "affinity has {} rows but embedding has {} points",
            p_tilde.n(),
            state.n()
        )));
    }
    if state.n() < 2 {
        return Err(Error::Parameter("need at least 2 points".into()));
    }
    Ok(())
}
