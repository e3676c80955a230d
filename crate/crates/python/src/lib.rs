//! Python bindings exposing the swarming embedding pipeline.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ars_core::data::DataMatrix;
use ars_core::dynamics::{self, Baseline, Engine, ExaggerationForm, RunConfig};
use ars_core::embedding::EmbeddingState;
use ars_core::kernels::KernelSpec;
use ars_core::metrics::{self, KlMode};
use ars_core::pipeline;

fn to_py_err(e: ars_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn data_matrix(rows: Vec<Vec<f64>>) -> PyResult<DataMatrix> {
    DataMatrix::from_rows(&rows).map_err(to_py_err)
}

fn state_from_rows(rows: Vec<Vec<f64>>, iteration: usize) -> PyResult<EmbeddingState> {
    let n = rows.len();
    let dim = rows.first().map_or(0, |r| r.len());
    let mut flat = Vec::with_capacity(n * dim);
    for r in &rows {
        if r.len() != dim {
            return Err(PyValueError::new_err("ragged embedding rows"));
        }
        flat.extend_from_slice(r);
    }
    EmbeddingState::from_positions(flat, n, dim, iteration, 0).map_err(to_py_err)
}

fn rows_from_state(state: &EmbeddingState) -> Vec<Vec<f64>> {
    (0..state.n()).map(|i| state.point(i).to_vec()).collect()
}

#[allow(clippy::too_many_arguments)]
fn build_config(
    theta1: f64,
    theta2: f64,
    repulsion: &str,
    gauss_sigma: f64,
    h: f64,
    alpha: f64,
    ee_iters: usize,
    iters: usize,
    engine: &str,
    bh_theta: f64,
    baseline: &str,
    ee_form: &str,
) -> PyResult<RunConfig> {
    let repulsion = match repulsion {
        "poly" => KernelSpec::polynomial(theta2),
        "gauss" => KernelSpec::gaussian(gauss_sigma),
        other => {
            return Err(PyValueError::new_err(format!(
                "repulsion must be 'poly' or 'gauss', got {other:?}"
            )))
        }
    };
    let engine = match engine {
        "exact" => Engine::Exact,
        "bh" => Engine::BarnesHut,
        other => {
            return Err(PyValueError::new_err(format!(
                "engine must be 'exact' or 'bh', got {other:?}"
            )))
        }
    };
    let baseline = match baseline {
        "none" => Baseline::None,
        "tsne" => Baseline::TsneVanilla,
        "tsne-dbd" => Baseline::TsneDbd,
        other => {
            return Err(PyValueError::new_err(format!(
                "baseline must be 'none', 'tsne' or 'tsne-dbd', got {other:?}"
            )))
        }
    };
    let ee_form = match ee_form {
        "ars" => ExaggerationForm::Normalized,
        "tsne" => ExaggerationForm::TsneStyle,
        other => {
            return Err(PyValueError::new_err(format!(
                "ee_form must be 'ars' or 'tsne', got {other:?}"
            )))
        }
    };
    let cfg = RunConfig {
        h,
        alpha,
        ee_iters,
        total_iters: iters,
        attraction: KernelSpec::polynomial(theta1),
        repulsion,
        engine,
        bh_theta,
        baseline,
        ee_form,
    };
    cfg.validate().map_err(to_py_err)?;
    Ok(cfg)
}

/// Embed high-dimensional rows into `dim` dimensions with the swarming
/// dynamics (or a gradient-descent baseline). Returns the embedded rows.
#[pyfunction]
#[pyo3(signature = (data, *, perplexity=30.0, dim=2, theta1=2.0, theta2=3.0,
    repulsion="poly", gauss_sigma=1.0, h=1.0, alpha=10.0, ee_iters=250,
    iters=1000, engine="bh", bh_theta=0.5, baseline="none", ee_form="ars",
    seed=0, k=None))]
#[allow(clippy::too_many_arguments)]
fn embed(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    perplexity: f64,
    dim: usize,
    theta1: f64,
    theta2: f64,
    repulsion: &str,
    gauss_sigma: f64,
    h: f64,
    alpha: f64,
    ee_iters: usize,
    iters: usize,
    engine: &str,
    bh_theta: f64,
    baseline: &str,
    ee_form: &str,
    seed: u64,
    k: Option<usize>,
) -> PyResult<Vec<Vec<f64>>> {
    let cfg = build_config(
        theta1, theta2, repulsion, gauss_sigma, h, alpha, ee_iters, iters, engine, bh_theta,
        baseline, ee_form,
    )?;
    let matrix = data_matrix(data)?;
    py.allow_threads(move || {
        let (p_sym, p_tilde) =
            pipeline::build_affinities(&matrix, perplexity, k).map_err(to_py_err)?;
        let mut state =
            EmbeddingState::new_uniform(matrix.n(), dim, seed).map_err(to_py_err)?;
        let mut rates = match cfg.baseline {
            Baseline::TsneDbd => Some(
                dynamics::AdaptiveRateState::new(matrix.n() * dim, cfg.h).map_err(to_py_err)?,
            ),
            _ => None,
        };
        for _ in 0..cfg.total_iters {
            let alpha_eff = cfg.alpha_at(state.iteration());
            state = match cfg.baseline {
                Baseline::TsneVanilla => {
                    dynamics::tsne_step(&state, &p_sym, cfg.h, alpha_eff, None)
                }
                Baseline::TsneDbd => {
                    dynamics::tsne_step(&state, &p_sym, cfg.h, alpha_eff, rates.as_mut())
                }
                Baseline::None => {
                    let in_ee = state.iteration() < cfg.ee_iters;
                    if in_ee && cfg.ee_form == ExaggerationForm::TsneStyle {
                        dynamics::tsne_step(&state, &p_sym, cfg.h, alpha_eff, None)
                    } else {
                        match cfg.engine {
                            Engine::Exact => dynamics::ars_step_exact(&state, &p_tilde, &cfg),
                            Engine::BarnesHut => {
                                ars_core::barneshut::ars_step_bh(&state, &p_tilde, &cfg)
                            }
                        }
                    }
                }
            }
            .map_err(to_py_err)?;
        }
        Ok(rows_from_state(&state))
    })
}

/// Kullback-Leibler divergence between the perplexity-calibrated affinity
/// of `data` and the embedding similarity of `embedding` (restricted to the
/// sparse affinity support).
#[pyfunction]
#[pyo3(signature = (data, embedding, *, perplexity=30.0, k=None))]
fn kl_divergence(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    embedding: Vec<Vec<f64>>,
    perplexity: f64,
    k: Option<usize>,
) -> PyResult<f64> {
    let matrix = data_matrix(data)?;
    let state = state_from_rows(embedding, 0)?;
    py.allow_threads(move || {
        let (p_sym, _) = pipeline::build_affinities(&matrix, perplexity, k).map_err(to_py_err)?;
        let mode = if state.n() <= pipeline::KL_EXACT_LIMIT {
            KlMode::Exact
        } else {
            KlMode::BhApprox { bh_theta: 0.5 }
        };
        let report = metrics::kl_divergence(&p_sym, &state, mode).map_err(to_py_err)?;
        Ok(report.kl_value)
    })
}

/// Mean fraction of `k` nearest data-space neighbors preserved among the
/// `k` nearest embedding-space neighbors.
#[pyfunction]
fn neighbor_preservation(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    embedding: Vec<Vec<f64>>,
    k: usize,
) -> PyResult<f64> {
    let matrix = data_matrix(data)?;
    let state = state_from_rows(embedding, 0)?;
    py.allow_threads(move || {
        metrics::neighbor_preservation(&matrix, &state, k).map_err(to_py_err)
    })
}

/// Spatial diameter (maximum pairwise distance) of an embedding.
#[pyfunction]
fn diameter(embedding: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(state_from_rows(embedding, 0)?.diameter())
}

#[pymodule]
fn arsviz(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(neighbor_preservation, m)?)?;
    m.add_function(wrap_pyfunction!(diameter, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
