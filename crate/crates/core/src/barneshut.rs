#![allow(clippy::needless_range_loop)] // indexed loops over `dim` axes

//! Barnes-Hut engine: a quadtree/octree over the embedding positions lets
//! the repulsion term (force numerator and total-influence denominator
//! together) be accumulated in O(log N) per point by treating far-away
//! cells as single pseudo-particles at their center of mass.

use rayon::prelude::*;

use crate::affinity::SparseAffinity;
use crate::dynamics::RunConfig;
use crate::embedding::EmbeddingState;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Deepest subdivision level; beyond it coincident points share one leaf
/// that is processed exactly pairwise.
const MAX_DEPTH: usize = 64;

const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone)]
enum NodeKind {
    /// Range into the permuted point order.
    Leaf { start: usize, len: usize },
    /// Child node ids per quadrant/octant; `NO_CHILD` marks empty ones.
    Internal { children: [u32; 8] },
}

#[derive(Debug, Clone)]
struct Node {
    bbox_min: [f64; 3],
    bbox_max: [f64; 3],
    center_of_mass: [f64; 3],
    count: usize,
    max_side: f64,
    kind: NodeKind,
}

/// Space-partitioning tree over a snapshot of embedding positions. Cells
/// subdivide at their bounding-box center (4 children in 2-D, 8 in 3-D)
/// with a leaf capacity of one point; every point ends up in exactly one
/// leaf. The tree is rebuilt from scratch every iteration.
pub struct SpatialTree<'a> {
    positions: &'a [f64],
    dim: usize,
    n: usize,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

/// One point's tree-accumulated repulsion sums: the force numerator
/// `sum m q(r) psi2(r) (y_cell - y_i)` and the total-influence denominator
/// `sum m q(r)`, with `q(r) = (1 + r^2)^-1` evaluated at the distance to
/// each accepted cell's center of mass. The assembled repulsion force is
/// `force_numerator / denom`. Only the first `dim` numerator entries are
/// meaningful.
#[derive(Debug, Clone, Copy)]
pub struct RepulsionAccumulator {
    pub force_numerator: [f64; 3],
    pub denom: f64,
}

/// Builds the spatial tree over `n` points stored row-major in `positions`.
pub fn build_tree(positions: &[f64], dim: usize) -> Result<SpatialTree<'_>> {
    SpatialTree::build(positions, dim)
}

impl<'a> SpatialTree<'a> {
    pub fn build(positions: &'a [f64], dim: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Parameter(format!(
                "tree dimension must be 2 or 3, got {dim}"
            )));
        }
        if positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(Error::Parameter(format!(
                "position buffer length {} is not a multiple of {dim}",
                positions.len()
            )));
        }
        if let Some(bad) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite position for point {}",
                bad / dim
            )));
        }
        let n = positions.len() / dim;

        let mut bbox_min = [f64::INFINITY; 3];
        let mut bbox_max = [f64::NEG_INFINITY; 3];
        for p in positions.chunks_exact(dim) {
            for a in 0..dim {
                bbox_min[a] = bbox_min[a].min(p[a]);
                bbox_max[a] = bbox_max[a].max(p[a]);
            }
        }
        for a in dim..3 {
            bbox_min[a] = 0.0;
            bbox_max[a] = 0.0;
        }

        let mut tree = SpatialTree {
            positions,
            dim,
            n,
            nodes: Vec::with_capacity(2 * n),
            order: (0..n).collect(),
        };
        let mut scratch = vec![0usize; n];
        tree.build_node(0, n, bbox_min, bbox_max, 0, &mut scratch);
        Ok(tree)
    }

    /// Recursively builds the node owning `order[start..start+len]` and
    /// returns its id.
    fn build_node(
        &mut self,
        start: usize,
        len: usize,
        bbox_min: [f64; 3],
        bbox_max: [f64; 3],
        depth: usize,
        scratch: &mut [usize],
    ) -> u32 {
        let dim = self.dim;
        let id = self.nodes.len() as u32;
        let max_side = (0..dim)
            .map(|a| bbox_max[a] - bbox_min[a])
            .fold(0.0, f64::max);
        self.nodes.push(Node {
            bbox_min,
            bbox_max,
            center_of_mass: [0.0; 3],
            count: len,
            max_side,
            kind: NodeKind::Leaf { start, len },
        });

        if len <= 1 || depth >= MAX_DEPTH {
            let mut com = [0.0; 3];
            for &p in &self.order[start..start + len] {
                let y = &self.positions[p * dim..p * dim + dim];
                for a in 0..dim {
                    com[a] += y[a];
                }
            }
            for c in com.iter_mut() {
                *c /= len as f64;
            }
            self.nodes[id as usize].center_of_mass = com;
            return id;
        }

        let mut center = [0.0; 3];
        for a in 0..dim {
            center[a] = 0.5 * (bbox_min[a] + bbox_max[a]);
        }

        // Stable counting sort of the range by quadrant/octant code.
        let n_quads = 1usize << dim;
        let mut counts = [0usize; 8];
        let quad_of = |p: usize| -> usize {
            let y = &self.positions[p * dim..p * dim + dim];
            let mut code = 0usize;
            for a in 0..dim {
                if y[a] >= center[a] {
                    code |= 1 << a;
                }
            }
            code
        };
        for &p in &self.order[start..start + len] {
            counts[quad_of(p)] += 1;
        }
        let mut offsets = [0usize; 8];
        let mut acc = 0;
        for q in 0..n_quads {
            offsets[q] = acc;
            acc += counts[q];
        }
        {
            let mut cursor = offsets;
            for &p in &self.order[start..start + len] {
                let q = quad_of(p);
                scratch[cursor[q]] = p;
                cursor[q] += 1;
            }
            self.order[start..start + len].copy_from_slice(&scratch[..len]);
        }

        let mut children = [NO_CHILD; 8];
        for q in 0..n_quads {
            if counts[q] == 0 {
                continue;
            }
            let mut cmin = bbox_min;
            let mut cmax = bbox_max;
            for a in 0..dim {
                if q & (1 << a) != 0 {
                    cmin[a] = center[a];
                } else {
                    cmax[a] = center[a];
                }
            }
            let (child_scratch, _) = scratch.split_at_mut(counts[q]);
            children[q] = self.build_node(
                start + offsets[q],
                counts[q],
                cmin,
                cmax,
                depth + 1,
                child_scratch,
            );
        }

        // Center of mass from the children, weighted by their counts.
        let mut com = [0.0; 3];
        for &c in children.iter().take(n_quads) {
            if c == NO_CHILD {
                continue;
            }
            let child = &self.nodes[c as usize];
            for a in 0..dim {
                com[a] += child.count as f64 * child.center_of_mass[a];
            }
        }
        for c in com.iter_mut() {
            *c /= len as f64;
        }
        let node = &mut self.nodes[id as usize];
        node.center_of_mass = com;
        node.kind = NodeKind::Internal { children };
        id
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_id(&self) -> usize {
        0
    }

    pub fn node_count(&self, id: usize) -> usize {
        self.nodes[id].count
    }

    pub fn node_center_of_mass(&self, id: usize) -> &[f64] {
        &self.nodes[id].center_of_mass[..self.dim]
    }

    pub fn node_max_side(&self, id: usize) -> f64 {
        self.nodes[id].max_side
    }

    /// Child node ids of an internal node; empty for leaves.
    pub fn node_children(&self, id: usize) -> Vec<usize> {
        match &self.nodes[id].kind {
            NodeKind::Leaf { .. } => Vec::new(),
            NodeKind::Internal { children } => children
                .iter()
                .filter(|&&c| c != NO_CHILD)
                .map(|&c| c as usize)
                .collect(),
        }
    }

    /// Point indices held by a leaf, or `None` for internal nodes.
    pub fn node_leaf_points(&self, id: usize) -> Option<&[usize]> {
        match self.nodes[id].kind {
            NodeKind::Leaf { start, len } => Some(&self.order[start..start + len]),
            NodeKind::Internal { .. } => None,
        }
    }
}

/// Tree-accumulated repulsion sums for the query point `y` (the first `dim`
/// entries are read). `exclude` names the point whose self-contribution is
/// skipped — pass the query's own index when `y` is one of the tree points.
///
/// A cell is treated as a pseudo-particle when `max_side / distance <
/// bh_theta` and the cell's box does not contain the query point (a cell
/// around the query is always opened, which guarantees the excluded point
/// never leaks into the sums). With `bh_theta = 0` the traversal enumerates
/// every point and the sums equal the dense ones up to summation order.
pub fn bh_repulsion(
    tree: &SpatialTree<'_>,
    y: &[f64],
    exclude: Option<usize>,
    bh_theta: f64,
    psi2: &KernelSpec,
) -> RepulsionAccumulator {
    let mut acc = RepulsionAccumulator {
        force_numerator: [0.0; 3],
        denom: 0.0,
    };
    let theta_sq = bh_theta * bh_theta;
    visit(tree, tree.root_id(), y, exclude, theta_sq, psi2, &mut acc);
    acc
}

fn visit(
    tree: &SpatialTree<'_>,
    id: usize,
    y: &[f64],
    exclude: Option<usize>,
    theta_sq: f64,
    psi2: &KernelSpec,
    acc: &mut RepulsionAccumulator,
) {
    let dim = tree.dim;
    let node = &tree.nodes[id];
    match node.kind {
        NodeKind::Leaf { start, len } => {
            for &p in &tree.order[start..start + len] {
                if exclude == Some(p) {
                    continue;
                }
                let yp = &tree.positions[p * dim..p * dim + dim];
                let mut r2 = 0.0;
                for a in 0..dim {
                    let t = yp[a] - y[a];
                    r2 += t * t;
                }
                let q = 1.0 / (1.0 + r2);
                acc.denom += q;
                let w = q * psi2.eval_sq(r2);
                for a in 0..dim {
                    acc.force_numerator[a] += w * (yp[a] - y[a]);
                }
            }
        }
        NodeKind::Internal { children } => {
            let mut r2 = 0.0;
            for a in 0..dim {
                let t = node.center_of_mass[a] - y[a];
                r2 += t * t;
            }
            let contains = (0..dim)
                .all(|a| node.bbox_min[a] <= y[a] && y[a] <= node.bbox_max[a]);
            if !contains && node.max_side * node.max_side < theta_sq * r2 {
                let q = 1.0 / (1.0 + r2);
                let m = node.count as f64;
                acc.denom += m * q;
                let w = m * q * psi2.eval_sq(r2);
                for a in 0..dim {
                    acc.force_numerator[a] += w * (node.center_of_mass[a] - y[a]);
                }
            } else {
                for &c in children.iter() {
                    if c != NO_CHILD {
                        visit(tree, c as usize, y, exclude, theta_sq, psi2, acc);
                    }
                }
            }
        }
    }
}

/// One swarming step with tree-approximated repulsion. The attraction term
/// is computed exactly over the sparse support of `p_tilde`; exaggeration
/// semantics match the exact engine.
pub fn ars_step_bh(
    state: &EmbeddingState,
    p_tilde: &SparseAffinity,
    cfg: &RunConfig,
) -> Result<EmbeddingState> {
    use crate::affinity::AffinityFlavor;
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

    let alpha = cfg.alpha_at(state.iteration());
    let tree = SpatialTree::build(state.positions(), state.dim())?;
    let new_positions = match state.dim() {
        2 => step_bh_dim::<2>(state, p_tilde, cfg, alpha, &tree),
        3 => step_bh_dim::<3>(state, p_tilde, cfg, alpha, &tree),
        _ => unreachable!("dimension validated at construction"),
    };
    state.advanced(new_positions)
}

fn step_bh_dim<const D: usize>(
    state: &EmbeddingState,
    p_tilde: &SparseAffinity,
    cfg: &RunConfig,
    alpha: f64,
    tree: &SpatialTree<'_>,
) -> Vec<f64> {
    let n = state.n();
    let positions = state.positions();
    let psi1 = cfg.attraction;
    let psi2 = cfg.repulsion;
    let h = cfg.h;

    let mut out = vec![0.0; n * D];
    out.par_chunks_mut(D).enumerate().for_each(|(i, out_i)| {
        let yi = &positions[i * D..i * D + D];
        let acc = bh_repulsion(tree, yi, Some(i), cfg.bh_theta, &psi2);

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
            out_i[a] = yi[a] + h * (alpha * attr[a] - acc.force_numerator[a] / acc.denom);
        }
    });
    out
}
