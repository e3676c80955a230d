//! Embedding snapshot serialization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::embedding::EmbeddingState;
use crate::error::{Error, Result};

/// Writes one `x,y[,z],label` row per point. Coordinates use the shortest
/// decimal form that parses back to the identical double, so a saved file
/// reproduces the positions exactly; the label is `-1` when absent.
pub fn save_embedding(
    state: &EmbeddingState,
    labels: Option<&[i64]>,
    path: &Path,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != state.n() {
            return Err(Error::Parameter(format!(
                "label count {} does not match point count {}",
                l.len(),
                state.n()
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..state.n() {
        let point = state.point(i);
        for v in point {
            write!(w, "{v},")?;
        }
        let label = labels.map_or(-1, |l| l[i]);
        writeln!(w, "{label}")?;
    }
    w.flush()?;
    Ok(())
}
