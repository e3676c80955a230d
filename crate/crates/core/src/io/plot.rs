//! Scatter-plot rendering of an embedding to a raster image.

use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};

use crate::embedding::EmbeddingState;
use crate::error::{Error, Result};

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const UNLABELED: Rgb<u8> = Rgb([128, 128, 128]);

/// Fixed categorical palette; label values index it modulo its length.
const PALETTE: [Rgb<u8>; 12] = [
    Rgb([31, 119, 180]),
    Rgb([255, 127, 14]),
    Rgb([44, 160, 44]),
    Rgb([214, 39, 40]),
    Rgb([148, 103, 189]),
    Rgb([140, 86, 75]),
    Rgb([227, 119, 194]),
    Rgb([127, 127, 127]),
    Rgb([188, 189, 34]),
    Rgb([23, 190, 207]),
    Rgb([255, 187, 120]),
    Rgb([152, 223, 138]),
];

fn color_for(label: i64) -> Rgb<u8> {
    if label < 0 {
        return UNLABELED;
    }
    PALETTE[(label as usize) % PALETTE.len()]
}

/// Renders the first two embedding axes into a `width x height` PNG. The
/// bounding box is fitted affinely into the canvas leaving a 5% margin per
/// side; a degenerate axis collapses to the canvas center. Identical inputs
/// produce byte-identical files.
pub fn render_scatter(
    state: &EmbeddingState,
    labels: Option<&[i64]>,
    path: &Path,
    width: u32,
    height: u32,
) -> Result<()> {
    if width < 4 || height < 4 {
        return Err(Error::Parameter(format!(
            "canvas {width}x{height} is too small"
        )));
    }
    if let Some(l) = labels {
        if l.len() != state.n() {
            return Err(Error::Parameter(format!(
                "label count {} does not match point count {}",
                l.len(),
                state.n()
            )));
        }
    }

    let n = state.n();
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let p = state.point(i);
        min_x = min_x.min(p[0]);
        max_x = max_x.max(p[0]);
        min_y = min_y.min(p[1]);
        max_y = max_y.max(p[1]);
    }

    let margin_x = 0.05 * (width - 1) as f64;
    let margin_y = 0.05 * (height - 1) as f64;
    let span_x = (width - 1) as f64 - 2.0 * margin_x;
    let span_y = (height - 1) as f64 - 2.0 * margin_y;

    let map_axis = |v: f64, lo: f64, hi: f64, margin: f64, span: f64, extent: f64| -> f64 {
        if hi - lo <= 0.0 {
            0.5 * extent
        } else {
            margin + (v - lo) / (hi - lo) * span
        }
    };

    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    let radius = (width.min(height) as i64 / 400).max(1);
    for i in 0..n {
        let p = state.point(i);
        let px = map_axis(p[0], min_x, max_x, margin_x, span_x, (width - 1) as f64);
        // Image rows grow downward; flip so larger y plots higher.
        let py_up = map_axis(p[1], min_y, max_y, margin_y, span_y, (height - 1) as f64);
        let py = (height - 1) as f64 - py_up;
        let cx = px.round() as i64;
        let cy = py.round() as i64;
        let color = color_for(labels.map_or(-1, |l| l[i]));
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if dx * dx + dy * dy > radius * radius {
                    continue;
                }
                let (x, y) = (cx + dx, cy + dy);
                if x >= 0 && y >= 0 && (x as u32) < width && (y as u32) < height {
                    img.put_pixel(x as u32, y as u32, color);
                }
            }
        }
    }

    img.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Format(format!("image encoding failed: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixel(path: &Path, x: u32, y: u32) -> Rgb<u8> {
        let img = image::open(path).unwrap().to_rgb8();
        *img.get_pixel(x, y)
    }

    #[test]
    fn single_point_lands_at_canvas_center() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        let state = EmbeddingState::from_positions(vec![3.0, -2.0], 1, 2, 0, 0).unwrap();
        render_scatter(&state, None, &path, 101, 101).unwrap();
        assert_eq!(pixel(&path, 50, 50), UNLABELED);
        assert_eq!(pixel(&path, 0, 0), BACKGROUND);
    }

    #[test]
    fn two_points_land_at_opposite_margin_corners() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        let state =
            EmbeddingState::from_positions(vec![0.0, 0.0, 1.0, 1.0], 2, 2, 0, 0).unwrap();
        render_scatter(&state, Some(&[0, 1]), &path, 101, 101).unwrap();
        // 5% margin of a 100-wide span is 5 pixels; y flips.
        assert_eq!(pixel(&path, 5, 95), color_for(0));
        assert_eq!(pixel(&path, 95, 5), color_for(1));
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.png");
        let p2 = dir.path().join("b.png");
        let state = EmbeddingState::new_uniform(40, 2, 5).unwrap();
        let labels: Vec<i64> = (0..40).map(|i| i % 4).collect();
        render_scatter(&state, Some(&labels), &p1, 160, 120).unwrap();
        render_scatter(&state, Some(&labels), &p2, 160, 120).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn three_dimensional_embedding_projects_first_two_axes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        let state = EmbeddingState::new_uniform(10, 3, 1).unwrap();
        render_scatter(&state, None, &path, 64, 64).unwrap();
        assert!(path.exists());
    }
}
