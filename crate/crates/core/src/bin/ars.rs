//! Command-line interface for running attraction-repulsion swarming
//! embeddings over IDX or delimited input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ars_core::dynamics::{Baseline, Engine, ExaggerationForm};
use ars_core::kernels::KernelSpec;
use ars_core::manifest::{InputFormat, RunManifest};
use ars_core::pipeline::run_pipeline;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputFormatArg {
    Idx,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RepulsionArg {
    Poly,
    Gauss,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    Exact,
    Bh,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineArg {
    None,
    Tsne,
    TsneDbd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EeFormArg {
    /// Exaggerate the normalized swarming attraction.
    Ars,
    /// Run gradient-descent exaggeration steps before the swarming phase.
    Tsne,
}

/// Attraction-repulsion swarming embedding of high-dimensional data.
#[derive(Parser, Debug)]
#[command(name = "ars", version, about)]
struct Cli {
    /// Run a previously saved manifest instead of the flags below.
    #[arg(long, conflicts_with = "input")]
    manifest: Option<PathBuf>,

    /// Input data file.
    #[arg(long, required_unless_present = "manifest")]
    input: Option<PathBuf>,

    /// Input file format.
    #[arg(long, value_enum, default_value = "csv")]
    input_format: InputFormatArg,

    /// Labels: IDX label file path for idx input; `last` or a 0-based
    /// column index for csv input.
    #[arg(long)]
    labels: Option<String>,

    /// Target perplexity (effective neighbor count) per point.
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,

    /// Neighbor count for the sparse affinity (default: 3 * perplexity).
    #[arg(long)]
    k: Option<usize>,

    /// Embedding dimension (2 or 3).
    #[arg(long, default_value_t = 2)]
    dim: usize,

    /// Attraction kernel exponent.
    #[arg(long, default_value_t = 2.0)]
    theta1: f64,

    /// Repulsion kernel exponent (polynomial repulsion).
    #[arg(long, default_value_t = 3.0)]
    theta2: f64,

    /// Repulsion kernel family.
    #[arg(long, value_enum, default_value = "poly")]
    repulsion: RepulsionArg,

    /// Gaussian repulsion width (with --repulsion gauss).
    #[arg(long, default_value_t = 1.0)]
    gauss_sigma: f64,

    /// Step size.
    #[arg(long, default_value_t = 1.0)]
    step: f64,

    /// Early-exaggeration factor.
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,

    /// Early-exaggeration iteration count.
    #[arg(long, default_value_t = 250)]
    ee_iters: usize,

    /// Total iteration count.
    #[arg(long, default_value_t = 1000)]
    iters: usize,

    /// Force engine.
    #[arg(long, value_enum, default_value = "bh")]
    engine: EngineArg,

    /// Barnes-Hut opening parameter (0 = exact traversal).
    #[arg(long, default_value_t = 0.5)]
    bh_theta: f64,

    /// Run a gradient-descent baseline instead of the swarming dynamics.
    #[arg(long, value_enum, default_value = "none")]
    baseline: BaselineArg,

    /// Early-exaggeration form for swarming runs.
    #[arg(long, value_enum, default_value = "ars")]
    ee_form: EeFormArg,

    /// Seed for the embedding initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Single-threaded numeric reductions for bit-identical reruns.
    #[arg(long)]
    deterministic: bool,

    /// Write an embedding snapshot every N iterations (0 = never).
    #[arg(long, default_value_t = 0)]
    snapshot_every: usize,

    /// Report the loss every N iterations (0 = never).
    #[arg(long, default_value_t = 50)]
    loss_every: usize,

    /// Output directory.
    #[arg(long, default_value = "ars_out")]
    out_dir: PathBuf,

    /// Render a scatter plot of the final embedding.
    #[arg(long)]
    plot: bool,
}

impl Cli {
    fn into_manifest(self) -> ars_core::Result<RunManifest> {
        if let Some(path) = self.manifest {
            return RunManifest::load(&path);
        }
        let repulsion = match self.repulsion {
            RepulsionArg::Poly => KernelSpec::polynomial(self.theta2),
            RepulsionArg::Gauss => KernelSpec::gaussian(self.gauss_sigma),
        };
        let mut manifest = RunManifest {
            input: self.input.expect("clap enforces --input"),
            input_format: match self.input_format {
                InputFormatArg::Idx => InputFormat::Idx,
                InputFormatArg::Csv => InputFormat::Csv,
            },
            labels: self.labels,
            perplexity: self.perplexity,
            k: self.k,
            dim: self.dim,
            seed: self.seed,
            threads: self.threads,
            deterministic: self.deterministic,
            snapshot_every: self.snapshot_every,
            loss_every: self.loss_every,
            out_dir: self.out_dir,
            plot: self.plot,
            ..RunManifest::default()
        };
        manifest.config.h = self.step;
        manifest.config.alpha = self.alpha;
        manifest.config.ee_iters = self.ee_iters;
        manifest.config.total_iters = self.iters;
        manifest.config.attraction = KernelSpec::polynomial(self.theta1);
        manifest.config.repulsion = repulsion;
        manifest.config.engine = match self.engine {
            EngineArg::Exact => Engine::Exact,
            EngineArg::Bh => Engine::BarnesHut,
        };
        manifest.config.bh_theta = self.bh_theta;
        manifest.config.baseline = match self.baseline {
            BaselineArg::None => Baseline::None,
            BaselineArg::Tsne => Baseline::TsneVanilla,
            BaselineArg::TsneDbd => Baseline::TsneDbd,
        };
        manifest.config.ee_form = match self.ee_form {
            EeFormArg::Ars => ExaggerationForm::Normalized,
            EeFormArg::Tsne => ExaggerationForm::TsneStyle,
        };
        Ok(manifest)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let manifest = match cli.into_manifest() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match run_pipeline(&manifest) {
        Ok(out) => {
            println!(
                "embedded {} points in {}d after {} iterations",
                out.state.n(),
                out.state.dim(),
                out.state.iteration()
            );
            if let Some(last) = out.losses.last() {
                println!(
                    "final loss at iteration {}: {:.6} ({})",
                    last.iteration, last.kl_value, last.mode
                );
            }
            println!("embedding: {}", out.embedding_path.display());
            if let Some(plot) = out.plot_path {
                println!("plot: {}", plot.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
