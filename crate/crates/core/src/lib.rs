//! Attraction-repulsion swarming embeddings.
//!
//! Projects high-dimensional data into 2 or 3 dimensions by running an
//! interacting particle system: points attract along a perplexity-calibrated
//! similarity graph and repel through a heavy-tailed embedding kernel, with
//! both forces normalized by their total influence. The normalization keeps
//! force magnitudes O(1) regardless of the data size, so a unit step size
//! works without learning-rate schedules, momentum, or gradient clipping.
//! The attraction and repulsion kernels are tunable independently, which
//! controls cluster tightness and separation.
//!
//! Two engines compute the dynamics: an exact O(N^2) loop and a Barnes-Hut
//! tree approximation that runs in O(N log N) per iteration. A plain
//! gradient-descent baseline (optionally with delta-bar-delta rate
//! adaptation) is included for comparisons.

pub mod affinity;
pub mod barneshut;
pub mod data;
pub mod dynamics;
pub mod embedding;
pub mod error;
pub mod io;
pub mod kernels;
pub mod manifest;
pub mod metrics;
pub mod pipeline;

pub use affinity::{
    build_conditional, calibrate_bandwidth, default_neighbor_count, knn_search, row_entropy_probs,
    row_normalize, symmetrize, AffinityFlavor, ConditionalAffinity, NeighborGraph, SparseAffinity,
};
pub use data::{DataMatrix, LabeledDataset};
pub use dynamics::{
    ars_step_exact, collective_coefficients, q_tilde_row, tsne_step, AdaptiveRateState, Baseline,
    CollectiveCoefficients, Engine, ExaggerationForm, RunConfig,
};
pub use barneshut::{ars_step_bh, bh_repulsion, build_tree, RepulsionAccumulator, SpatialTree};
pub use embedding::EmbeddingState;
pub use error::{Error, Result, Stage};
pub use io::{load_delimited, load_idx, render_scatter, save_embedding, LabelColumn};
pub use manifest::{InputFormat, RunManifest};
pub use metrics::{kl_divergence, neighbor_preservation, KlMode, LossReport};
pub use pipeline::{run_pipeline, RunOutput};
pub use kernels::{kernel_eval, KernelSpec};
