//! Run manifests: a flat `key = value` description of everything needed to
//! reproduce a run exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dynamics::{Baseline, Engine, ExaggerationForm, RunConfig};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Input file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Idx,
    Csv,
}

/// Complete description of one run: input, affinity parameters, dynamics
/// configuration, and output policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub input: PathBuf,
    pub input_format: InputFormat,
    /// IDX label file path, or a CSV label column (`last` or an index).
    pub labels: Option<String>,
    pub perplexity: f64,
    /// Neighbor count; `None` selects `3 * perplexity` rounded up.
    pub k: Option<usize>,
    pub dim: usize,
    pub config: RunConfig,
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
    /// Forces single-threaded numeric reductions.
    pub deterministic: bool,
    /// Embedding snapshot cadence in iterations; 0 disables snapshots.
    pub snapshot_every: usize,
    /// Loss reporting cadence in iterations; 0 disables loss reporting.
    pub loss_every: usize,
    pub out_dir: PathBuf,
    pub plot: bool,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            input: PathBuf::new(),
            input_format: InputFormat::Csv,
            labels: None,
            perplexity: 30.0,
            k: None,
            dim: 2,
            config: RunConfig::default(),
            seed: 0,
            threads: 0,
            deterministic: false,
            snapshot_every: 0,
            loss_every: 50,
            out_dir: PathBuf::from("ars_out"),
            plot: false,
        }
    }
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let (rep_family, theta2, gauss_sigma) = match c.repulsion {
            KernelSpec::Polynomial { theta } => ("poly", theta, 1.0),
            KernelSpec::Gaussian { sigma } => ("gauss", 3.0, sigma),
        };
        // Manifests describe the CLI surface, where attraction is always
        // polynomial; a Gaussian attraction cannot be represented.
        let theta1 = match c.attraction {
            KernelSpec::Polynomial { theta } => theta,
            KernelSpec::Gaussian { .. } => {
                log::warn!("manifest cannot express a gaussian attraction kernel; writing theta1 = 2");
                2.0
            }
        };
        let mut s = String::new();
        let _ = writeln!(s, "input = {}", self.input.display());
        let _ = writeln!(
            s,
            "input_format = {}",
            match self.input_format {
                InputFormat::Idx => "idx",
                InputFormat::Csv => "csv",
            }
        );
        if let Some(ref l) = self.labels {
            let _ = writeln!(s, "labels = {l}");
        }
        let _ = writeln!(s, "perplexity = {}", self.perplexity);
        let _ = writeln!(
            s,
            "k = {}",
            self.k.map_or("auto".to_string(), |k| k.to_string())
        );
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "step = {}", c.h);
        let _ = writeln!(s, "alpha = {}", c.alpha);
        let _ = writeln!(s, "ee_iters = {}", c.ee_iters);
        let _ = writeln!(s, "iters = {}", c.total_iters);
        let _ = writeln!(s, "theta1 = {theta1}");
        let _ = writeln!(s, "repulsion = {rep_family}");
        let _ = writeln!(s, "theta2 = {theta2}");
        let _ = writeln!(s, "gauss_sigma = {gauss_sigma}");
        let _ = writeln!(
            s,
            "engine = {}",
            match c.engine {
                Engine::Exact => "exact",
                Engine::BarnesHut => "bh",
            }
        );
        let _ = writeln!(s, "bh_theta = {}", c.bh_theta);
        let _ = writeln!(
            s,
            "baseline = {}",
            match c.baseline {
                Baseline::None => "none",
                Baseline::TsneVanilla => "tsne",
                Baseline::TsneDbd => "tsne-dbd",
            }
        );
        let _ = writeln!(
            s,
            "ee_form = {}",
            match c.ee_form {
                ExaggerationForm::Normalized => "ars",
                ExaggerationForm::TsneStyle => "tsne",
            }
        );
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "deterministic = {}", self.deterministic);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "loss_every = {}", self.loss_every);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "plot = {}", self.plot);
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut m = RunManifest::default();
        let mut rep_family = "poly".to_string();
        let mut theta2 = 3.0;
        let mut gauss_sigma = 1.0;
        let mut theta1 = 2.0;

        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |msg: String| Error::Parse {
                line: idx + 1,
                msg,
            };
            match key {
                "input" => m.input = PathBuf::from(value),
                "input_format" => {
                    m.input_format = match value {
                        "idx" => InputFormat::Idx,
                        "csv" => InputFormat::Csv,
                        other => return Err(bad(format!("unknown input format {other:?}"))),
                    }
                }
                "labels" => m.labels = Some(value.to_string()),
                "perplexity" => m.perplexity = parse_num(value, key, idx)?,
                "k" => {
                    m.k = if value == "auto" {
                        None
                    } else {
                        Some(parse_num(value, key, idx)?)
                    }
                }
                "dim" => m.dim = parse_num(value, key, idx)?,
                "step" => m.config.h = parse_num(value, key, idx)?,
                "alpha" => m.config.alpha = parse_num(value, key, idx)?,
                "ee_iters" => m.config.ee_iters = parse_num(value, key, idx)?,
                "iters" => m.config.total_iters = parse_num(value, key, idx)?,
                "theta1" => theta1 = parse_num(value, key, idx)?,
                "repulsion" => rep_family = value.to_string(),
                "theta2" => theta2 = parse_num(value, key, idx)?,
                "gauss_sigma" => gauss_sigma = parse_num(value, key, idx)?,
                "engine" => {
                    m.config.engine = match value {
                        "exact" => Engine::Exact,
                        "bh" => Engine::BarnesHut,
                        other => return Err(bad(format!("unknown engine {other:?}"))),
                    }
                }
                "bh_theta" => m.config.bh_theta = parse_num(value, key, idx)?,
                "baseline" => {
                    m.config.baseline = match value {
                        "none" => Baseline::None,
                        "tsne" => Baseline::TsneVanilla,
                        "tsne-dbd" => Baseline::TsneDbd,
                        other => return Err(bad(format!("unknown baseline {other:?}"))),
                    }
                }
                "ee_form" => {
                    m.config.ee_form = match value {
                        "ars" => ExaggerationForm::Normalized,
                        "tsne" => ExaggerationForm::TsneStyle,
                        other => return Err(bad(format!("unknown ee form {other:?}"))),
                    }
                }
                "seed" => m.seed = parse_num(value, key, idx)?,
                "threads" => m.threads = parse_num(value, key, idx)?,
                "deterministic" => m.deterministic = parse_bool(value, key, idx)?,
                "snapshot_every" => m.snapshot_every = parse_num(value, key, idx)?,
                "loss_every" => m.loss_every = parse_num(value, key, idx)?,
                "out_dir" => m.out_dir = PathBuf::from(value),
                "plot" => m.plot = parse_bool(value, key, idx)?,
                other => return Err(bad(format!("unknown manifest key {other:?}"))),
            }
        }

        m.config.attraction = KernelSpec::polynomial(theta1);
        m.config.repulsion = match rep_family.as_str() {
            "poly" => KernelSpec::polynomial(theta2),
            "gauss" => KernelSpec::gaussian(gauss_sigma),
            other => {
                return Err(Error::Format(format!(
                    "unknown repulsion kernel family {other:?}"
                )))
            }
        };
        Ok(m)
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str, idx: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line: idx + 1,
        msg: format!("invalid value for {key}: {value:?}"),
    })
}

fn parse_bool(value: &str, key: &str, idx: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Parse {
            line: idx + 1,
            msg: format!("invalid boolean for {key}: {value:?}"),
        }),
    }
}
