//! Data ingestion, embedding export, and plot rendering.

pub mod delimited;
pub mod embedding_csv;
pub mod idx;
pub mod plot;

pub use delimited::{load_delimited, LabelColumn};
pub use embedding_csv::save_embedding;
pub use idx::{load_idx, save_idx};
pub use plot::render_scatter;
