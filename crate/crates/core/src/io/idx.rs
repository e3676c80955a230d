//! IDX binary format reader (big-endian, the MNIST distribution format).

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};

use crate::data::{DataMatrix, LabeledDataset};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Loads an IDX image file (and optionally the matching label file) into a
/// dataset. Images are flattened to `rows * cols` features and scaled from
/// byte range into `[0, 1]`.
pub fn load_idx(
    images_path: &Path,
    labels_path: Option<&Path>,
) -> Result<LabeledDataset> {
    let (values, n, d) = read_images(images_path)?;
    let labels = match labels_path {
        Some(path) => {
            let labels = read_labels(path)?;
            if labels.len() != n {
                return Err(Error::Data(format!(
                    "label count {} does not match image count {n}",
                    labels.len()
                )));
            }
            Some(labels)
        }
        None => None,
    };
    LabeledDataset::new(DataMatrix::new(values, n, d)?, labels)
}

fn read_images(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = reader.read_u32::<BigEndian>().map_err(|_| truncated(path))?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "{}: image magic number is {magic:#010x}, expected {IMAGES_MAGIC:#010x}",
            path.display()
        )));
    }
    let n = reader.read_u32::<BigEndian>().map_err(|_| truncated(path))? as usize;
    let rows = reader.read_u32::<BigEndian>().map_err(|_| truncated(path))? as usize;
    let cols = reader.read_u32::<BigEndian>().map_err(|_| truncated(path))? as usize;
    let d = rows * cols;

    let mut bytes = vec![0u8; n * d];
    reader.read_exact(&mut bytes).map_err(|_| {
        Error::Format(format!(
            "{}: payload truncated, expected {} pixel bytes",
            path.display(),
            n * d
        ))
    })?;
    let values = bytes.iter().map(|&b| b as f64 / 255.0).collect();
    Ok((values, n, d))
}

fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = reader.read_u32::<BigEndian>().map_err(|_| truncated(path))?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "{}: label magic number is {magic:#010x}, expected {LABELS_MAGIC:#010x}",
            path.display()
        )));
    }
    let n = reader.read_u32::<BigEndian>().map_err(|_| truncated(path))? as usize;
    let mut bytes = vec![0u8; n];
    reader.read_exact(&mut bytes).map_err(|_| {
        Error::Format(format!(
            "{}: payload truncated, expected {n} label bytes",
            path.display()
        ))
    })?;
    Ok(bytes.into_iter().map(|b| b as i64).collect())
}

fn truncated(path: &Path) -> Error {
    Error::Format(format!("{}: header truncated", path.display()))
}

/// Writes a dataset back out as an IDX image/label file pair. Feature values
/// are expected in `[0, 1]` and are quantized to bytes. Mainly useful for
/// producing loader-compatible fixtures.
pub fn save_idx(
    dataset: &LabeledDataset,
    rows: usize,
    cols: usize,
    images_path: &Path,
    labels_path: Option<&Path>,
) -> Result<()> {
    use byteorder::WriteBytesExt;
    use std::io::{BufWriter, Write};

    let data = &dataset.data;
    if rows * cols != data.d_in() {
        return Err(Error::Parameter(format!(
            "{rows} x {cols} does not match feature dimension {}",
            data.d_in()
        )));
    }
    let mut w = BufWriter::new(File::create(images_path)?);
    w.write_u32::<BigEndian>(IMAGES_MAGIC)?;
    w.write_u32::<BigEndian>(data.n() as u32)?;
    w.write_u32::<BigEndian>(rows as u32)?;
    w.write_u32::<BigEndian>(cols as u32)?;
    for &v in data.values() {
        w.write_u8((v.clamp(0.0, 1.0) * 255.0).round() as u8)?;
    }
    w.flush()?;

    if let Some(path) = labels_path {
        let labels = dataset
            .labels
            .as_ref()
            .ok_or_else(|| Error::Parameter("dataset has no labels to save".into()))?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_u32::<BigEndian>(LABELS_MAGIC)?;
        w.write_u32::<BigEndian>(labels.len() as u32)?;
        for &l in labels {
            w.write_u8(l as u8)?;
        }
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use byteorder::WriteBytesExt;
    use std::io::Write;

    fn write_images(path: &Path, n: u32, rows: u32, cols: u32, payload: &[u8]) {
        let mut f = File::create(path).unwrap();
        f.write_u32::<BigEndian>(IMAGES_MAGIC).unwrap();
        f.write_u32::<BigEndian>(n).unwrap();
        f.write_u32::<BigEndian>(rows).unwrap();
        f.write_u32::<BigEndian>(cols).unwrap();
        f.write_all(payload).unwrap();
    }

    fn write_labels(path: &Path, labels: &[u8]) {
        let mut f = File::create(path).unwrap();
        f.write_u32::<BigEndian>(LABELS_MAGIC).unwrap();
        f.write_u32::<BigEndian>(labels.len() as u32).unwrap();
        f.write_all(labels).unwrap();
    }

    #[test]
    fn reads_flattened_scaled_images() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.idx");
        write_images(&img, 2, 28, 28, &vec![255u8; 2 * 28 * 28]);
        let ds = load_idx(&img, None).unwrap();
        assert_eq!(ds.data.n(), 2);
        assert_eq!(ds.data.d_in(), 784);
        assert!(ds.data.values().iter().all(|&v| v == 1.0));
        assert!(ds.labels.is_none());
    }

    #[test]
    fn reads_labels() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.idx");
        let lab = dir.path().join("lab.idx");
        write_images(&img, 2, 1, 2, &[0, 128, 64, 255]);
        write_labels(&lab, &[3, 9]);
        let ds = load_idx(&img, Some(&lab)).unwrap();
        assert_eq!(ds.labels, Some(vec![3, 9]));
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.idx");
        let mut f = File::create(&img).unwrap();
        f.write_u32::<BigEndian>(0x0000_0801).unwrap();
        f.write_u32::<BigEndian>(1).unwrap();
        drop(f);
        let err = load_idx(&img, None).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.idx");
        write_images(&img, 3, 2, 2, &[0u8; 5]); // needs 12 bytes
        let err = load_idx(&img, None).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn rejects_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.idx");
        let lab = dir.path().join("lab.idx");
        write_images(&img, 3, 1, 1, &[1, 2, 3]);
        write_labels(&lab, &[0, 1]);
        let err = load_idx(&img, Some(&lab)).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("does not match"));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.idx");
        let lab = dir.path().join("lab.idx");
        let data = DataMatrix::new(vec![0.0, 0.5, 1.0, 0.25], 2, 2).unwrap();
        let ds = LabeledDataset::new(data, Some(vec![7, 1])).unwrap();
        save_idx(&ds, 1, 2, &img, Some(&lab)).unwrap();
        let back = load_idx(&img, Some(&lab)).unwrap();
        assert_eq!(back.data.n(), 2);
        assert_eq!(back.labels, Some(vec![7, 1]));
        for (a, b) in back.data.values().iter().zip(ds.data.values()) {
            assert!((a - b).abs() < 1.0 / 255.0);
        }
    }
}
