//! End-to-end run orchestration: ingestion, affinity construction, the
//! iteration loop with snapshot/loss cadence, and artifact export.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use crate::affinity::{self, SparseAffinity};
use crate::barneshut;
use crate::data::LabeledDataset;
use crate::dynamics::{self, AdaptiveRateState, Baseline, Engine, ExaggerationForm};
use crate::embedding::EmbeddingState;
use crate::error::{Error, Result, Stage};
use crate::io::{self, LabelColumn};
use crate::manifest::{InputFormat, RunManifest};
use crate::metrics::{self, KlMode, LossReport};

/// Point count above which loss reports switch from the dense normalizer to
/// the tree-approximated one.
pub const KL_EXACT_LIMIT: usize = 5000;

/// Everything a finished run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub state: EmbeddingState,
    pub labels: Option<Vec<i64>>,
    pub losses: Vec<LossReport>,
    pub snapshots: Vec<PathBuf>,
    pub embedding_path: PathBuf,
    pub plot_path: Option<PathBuf>,
}

/// Resolves the label argument for delimited input: `last` or a 0-based
/// column index.
fn parse_label_column(spec: &str) -> Result<LabelColumn> {
    if spec == "last" {
        return Ok(LabelColumn::Last);
    }
    spec.parse::<usize>().map(LabelColumn::Index).map_err(|_| {
        Error::Parameter(format!(
            "label column must be `last` or a column index, got {spec:?}"
        ))
    })
}

/// Loads the dataset named by the manifest.
pub fn load_dataset(manifest: &RunManifest) -> Result<LabeledDataset> {
    match manifest.input_format {
        InputFormat::Idx => {
            let labels_path = manifest.labels.as_ref().map(PathBuf::from);
            io::load_idx(&manifest.input, labels_path.as_deref())
        }
        InputFormat::Csv => {
            let label_column = manifest
                .labels
                .as_deref()
                .map(parse_label_column)
                .transpose()?;
            io::load_delimited(&manifest.input, ',', false, label_column)
        }
    }
}

/// Builds the affinity pair (symmetrized P, row-normalized P-tilde) for a
/// dataset at the manifest's perplexity.
pub fn build_affinities(
    data: &crate::data::DataMatrix,
    perplexity: f64,
    k: Option<usize>,
) -> Result<(SparseAffinity, SparseAffinity)> {
    let k = k.unwrap_or_else(|| affinity::default_neighbor_count(data.n(), perplexity));
    let graph = affinity::knn_search(data, k)?;
    let cond = affinity::build_conditional(&graph, perplexity)?;
    let p_sym = affinity::symmetrize(&cond, data.n())?;
    let p_tilde = affinity::row_normalize(&p_sym)?;
    Ok((p_sym, p_tilde))
}

/// Runs a manifest end to end. Deterministic given the seed in
/// single-threaded mode; per-point parallelism never reorders reductions, so
/// in practice results are identical at any thread count.
pub fn run_pipeline(manifest: &RunManifest) -> Result<RunOutput> {
    manifest.config.validate()?;
    if manifest.loss_every == 0 {
        log::info!("loss reporting disabled (loss_every = 0)");
    }
    let threads = if manifest.deterministic {
        1
    } else {
        manifest.threads
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(manifest))
}

fn run_inner(manifest: &RunManifest) -> Result<RunOutput> {
    let cfg = &manifest.config;
    std::fs::create_dir_all(&manifest.out_dir).map_err(|e| Error::from(e).in_stage(Stage::Io))?;
    manifest
        .save(&manifest.out_dir.join("manifest.txt"))
        .map_err(|e| e.in_stage(Stage::Io))?;

    let dataset = load_dataset(manifest).map_err(|e| e.in_stage(Stage::Io))?;
    let n = dataset.data.n();

    let (p_sym, p_tilde) = build_affinities(&dataset.data, manifest.perplexity, manifest.k)
        .map_err(|e| e.in_stage(Stage::Affinity))?;

    let mut state = EmbeddingState::new_uniform(n, manifest.dim, manifest.seed)
        .map_err(|e| e.in_stage(Stage::Dynamics))?;

    let mut rate_state = match cfg.baseline {
        Baseline::TsneDbd => Some(
            AdaptiveRateState::new(n * manifest.dim, cfg.h)
                .map_err(|e| e.in_stage(Stage::Dynamics))?,
        ),
        _ => None,
    };

    let kl_mode = if n <= KL_EXACT_LIMIT {
        KlMode::Exact
    } else {
        KlMode::BhApprox {
            bh_theta: cfg.bh_theta,
        }
    };
    let loss_path = manifest.out_dir.join("losses.csv");
    let mut losses: Vec<LossReport> = Vec::new();
    let mut snapshots: Vec<PathBuf> = Vec::new();

    for _ in 0..cfg.total_iters {
        let alpha = cfg.alpha_at(state.iteration());
        state = match cfg.baseline {
            Baseline::TsneVanilla => {
                dynamics::tsne_step(&state, &p_sym, cfg.h, alpha, None)
            }
            Baseline::TsneDbd => {
                dynamics::tsne_step(&state, &p_sym, cfg.h, alpha, rate_state.as_mut())
            }
            Baseline::None => {
                let in_ee = state.iteration() < cfg.ee_iters;
                if in_ee && cfg.ee_form == ExaggerationForm::TsneStyle {
                    dynamics::tsne_step(&state, &p_sym, cfg.h, alpha, None)
                } else {
                    match cfg.engine {
                        Engine::Exact => dynamics::ars_step_exact(&state, &p_tilde, cfg),
                        Engine::BarnesHut => barneshut::ars_step_bh(&state, &p_tilde, cfg),
                    }
                }
            }
        }
        .map_err(|e| e.in_stage(Stage::Dynamics))?;

        let iter = state.iteration();
        if manifest.snapshot_every > 0 && iter % manifest.snapshot_every == 0 {
            let path = manifest.out_dir.join(format!("iter_{iter:06}.csv"));
            io::save_embedding(&state, dataset.labels.as_deref(), &path)
                .map_err(|e| e.in_stage(Stage::Io))?;
            snapshots.push(path);
        }
        let want_loss = manifest.loss_every > 0
            && (iter % manifest.loss_every == 0 || iter == cfg.total_iters);
        if want_loss {
            let report = metrics::kl_divergence(&p_sym, &state, kl_mode)
                .map_err(|e| e.in_stage(Stage::Metrics))?;
            append_loss(&loss_path, &report).map_err(|e| e.in_stage(Stage::Io))?;
            losses.push(report);
        }
    }

    let embedding_path = manifest.out_dir.join("embedding.csv");
    io::save_embedding(&state, dataset.labels.as_deref(), &embedding_path)
        .map_err(|e| e.in_stage(Stage::Io))?;

    let plot_path = if manifest.plot {
        let path = manifest.out_dir.join("plot.png");
        io::render_scatter(&state, dataset.labels.as_deref(), &path, 1000, 1000)
            .map_err(|e| e.in_stage(Stage::Io))?;
        Some(path)
    } else {
        None
    };

    Ok(RunOutput {
        state,
        labels: dataset.labels,
        losses,
        snapshots,
        embedding_path,
        plot_path,
    })
}

fn append_loss(path: &std::path::Path, report: &LossReport) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", report.to_csv_line())?;
    Ok(())
}
