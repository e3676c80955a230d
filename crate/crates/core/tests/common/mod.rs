//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ars_core::affinity::{self, AffinityFlavor, SparseAffinity};
use ars_core::data::{DataMatrix, LabeledDataset};
use ars_core::embedding::EmbeddingState;
use ars_core::io;

/// Approximate standard normal from the sum of twelve uniforms; good enough
/// for generating test clouds and fully deterministic.
pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0
}

/// `n` points around the origin with the given spread.
pub fn gaussian_blob(n: usize, d: usize, seed: u64, spread: f64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n * d).map(|_| gauss(&mut rng) * spread).collect();
    DataMatrix::new(values, n, d).unwrap()
}

/// Random positions in `[0, scale)^dim` as an embedding state.
pub fn random_state(n: usize, dim: usize, seed: u64, scale: f64) -> EmbeddingState {
    let base = EmbeddingState::new_uniform(n, dim, seed).unwrap();
    let positions: Vec<f64> = base.positions().iter().map(|v| v * scale).collect();
    EmbeddingState::from_positions(positions, n, dim, 0, seed).unwrap()
}

/// Affinity pair (symmetrized, row-normalized) over the full `k = n - 1`
/// support, so every off-diagonal entry is present.
pub fn dense_affinities(
    data: &DataMatrix,
    perplexity: f64,
) -> (SparseAffinity, SparseAffinity) {
    let graph = affinity::knn_search(data, data.n() - 1).unwrap();
    let cond = affinity::build_conditional(&graph, perplexity).unwrap();
    let p_sym = affinity::symmetrize(&cond, data.n()).unwrap();
    let p_tilde = affinity::row_normalize(&p_sym).unwrap();
    (p_sym, p_tilde)
}

/// Sparse affinity pair at the default `3 * perplexity` neighbor count.
pub fn sparse_affinities(
    data: &DataMatrix,
    perplexity: f64,
) -> (SparseAffinity, SparseAffinity) {
    let k = affinity::default_neighbor_count(data.n(), perplexity);
    let graph = affinity::knn_search(data, k).unwrap();
    let cond = affinity::build_conditional(&graph, perplexity).unwrap();
    let p_sym = affinity::symmetrize(&cond, data.n()).unwrap();
    let p_tilde = affinity::row_normalize(&p_sym).unwrap();
    (p_sym, p_tilde)
}

/// Hand-built row-normalized affinity over an explicit dense support with
/// uniform weights (useful where only the support matters).
pub fn uniform_p_tilde(n: usize) -> SparseAffinity {
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, 1.0 / (n as f64 - 1.0)))
                .collect()
        })
        .collect();
    SparseAffinity::from_rows(rows, AffinityFlavor::RowNormalizedPTilde).unwrap()
}

const IMG_SIDE: usize = 28;

/// One class prototype: a handful of smooth bumps on the 28x28 canvas.
struct Prototype {
    bumps: Vec<(f64, f64, f64, f64)>, // (cx, cy, sigma, amplitude)
}

impl Prototype {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let n_bumps = 5 + (rng.random::<f64>() * 3.0) as usize;
        let bumps = (0..n_bumps)
            .map(|_| {
                let cx = 5.0 + rng.random::<f64>() * 18.0;
                let cy = 5.0 + rng.random::<f64>() * 18.0;
                let sigma = 1.6 + rng.random::<f64>() * 2.6;
                let amp = 0.6 + rng.random::<f64>() * 0.4;
                (cx, cy, sigma, amp)
            })
            .collect();
        Prototype { bumps }
    }

    /// Intensity at a (possibly shifted) continuous pixel coordinate.
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.bumps
            .iter()
            .map(|&(cx, cy, sigma, amp)| {
                let dx = x - cx;
                let dy = y - cy;
                amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            })
            .sum()
    }
}

/// Deterministic digits-like image set: each class is a smooth prototype
/// rendered per sample under a random shift, intensity scale, and pixel
/// noise. Raw pixel values in [0, 1], flattened to 784 features — a
/// stand-in with MNIST-like shape and cluster structure for environments
/// where the real files are unavailable.
pub fn synthetic_digits(n: usize, classes: &[i64], seed: u64) -> LabeledDataset {
    let mut proto_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1617);
    // Prototypes are drawn for the max class id, so a given (seed, class)
    // pair always yields the same prototype regardless of the subset.
    let max_class = classes.iter().copied().max().unwrap_or(0) as usize;
    let prototypes: Vec<Prototype> = (0..=max_class)
        .map(|_| Prototype::sample(&mut proto_rng))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * IMG_SIDE * IMG_SIDE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = classes[i % classes.len()];
        let proto = &prototypes[class as usize];
        let dx = (rng.random::<f64>() - 0.5) * 5.0;
        let dy = (rng.random::<f64>() - 0.5) * 5.0;
        let scale = 0.75 + rng.random::<f64>() * 0.4;
        for py in 0..IMG_SIDE {
            for px in 0..IMG_SIDE {
                let v = scale * proto.eval(px as f64 - dx, py as f64 - dy);
                let noise = (rng.random::<f64>() - 0.5) * 0.16;
                values.push((v + noise).clamp(0.0, 1.0));
            }
        }
        labels.push(class);
    }
    let data = DataMatrix::new(values, n, IMG_SIDE * IMG_SIDE).unwrap();
    LabeledDataset::new(data, Some(labels)).unwrap()
}

/// Returns a directory with real MNIST IDX files if one is configured via
/// `ARS_MNIST_DIR` or present at `data/mnist`.
fn real_mnist_dir() -> Option<PathBuf> {
    let mut candidates: Vec<PathBuf> = Vec::new();
    if let Ok(dir) = std::env::var("ARS_MNIST_DIR") {
        candidates.push(PathBuf::from(dir));
    }
    candidates.push(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    candidates.into_iter().find(|dir| {
        dir.join("train-images-idx3-ubyte").exists()
            && dir.join("train-labels-idx1-ubyte").exists()
    })
}

/// A digits dataset for reproduction runs: the first `n` real MNIST images
/// with the requested labels when the files are available, otherwise the
/// deterministic synthetic stand-in. Returns the dataset and its source
/// name for logging.
pub fn digits_dataset(n: usize, classes: &[i64], seed: u64) -> (LabeledDataset, &'static str) {
    if let Some(dir) = real_mnist_dir() {
        let ds = io::load_idx(
            &dir.join("train-images-idx3-ubyte"),
            Some(&dir.join("train-labels-idx1-ubyte")),
        )
        .expect("failed to read MNIST files");
        let labels = ds.labels.as_ref().unwrap();
        let picked: Vec<usize> = (0..ds.data.n())
            .filter(|&i| classes.contains(&labels[i]))
            .take(n)
            .collect();
        if picked.len() == n {
            let mut values = Vec::with_capacity(n * ds.data.d_in());
            let mut sub_labels = Vec::with_capacity(n);
            for &i in &picked {
                values.extend_from_slice(ds.data.row(i));
                sub_labels.push(labels[i]);
            }
            let data = DataMatrix::new(values, n, ds.data.d_in()).unwrap();
            return (
                LabeledDataset::new(data, Some(sub_labels)).unwrap(),
                "mnist",
            );
        }
    }
    (synthetic_digits(n, classes, seed), "synthetic")
}

/// Materializes a digits dataset as IDX files inside `dir` so pipeline runs
/// exercise the real ingestion path. Returns the image and label paths plus
/// the data source name.
pub fn materialize_digits(
    dir: &Path,
    n: usize,
    classes: &[i64],
    seed: u64,
) -> (PathBuf, PathBuf, &'static str) {
    let (dataset, source) = digits_dataset(n, classes, seed);
    let images = dir.join(format!("digits_{n}_{seed}_images.idx"));
    let labels = dir.join(format!("digits_{n}_{seed}_labels.idx"));
    io::save_idx(&dataset, IMG_SIDE, IMG_SIDE, &images, Some(&labels)).unwrap();
    (images, labels, source)
}
