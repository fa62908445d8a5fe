//! Dataset generation, CSV ingestion, and float-checkpoint files.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::objectives::Dataset;

/// Stratified train/validation pair (5:1 split).
#[derive(Debug, Clone)]
pub struct BlobSplit {
    pub train: Dataset,
    pub val: Dataset,
}

/// Radius of the circle (or 1-D spacing) the class centers sit on.
const BLOB_RADIUS: f64 = 3.0;

fn blob_center(class: usize, num_classes: usize, dim: usize) -> Vec<f64> {
    let mut center = vec![0.0; dim];
    if dim == 1 {
        center[0] = BLOB_RADIUS * (class as f64 - (num_classes as f64 - 1.0) / 2.0);
    } else {
        let angle = 2.0 * std::f64::consts::PI * class as f64 / num_classes as f64;
        center[0] = BLOB_RADIUS * angle.cos();
        center[1] = BLOB_RADIUS * angle.sin();
    }
    center
}

/// Gaussian clusters around fixed per-class centers, deterministically
/// generated from `seed` and split 5:1 per class (the first sixth of each
/// class goes to validation).
pub fn gen_blobs(
    n_samples: usize,
    dim: usize,
    num_classes: usize,
    spread: f64,
    seed: u64,
) -> Result<BlobSplit> {
    if num_classes < 2 {
        return Err(Error::InvalidInput("blobs need at least 2 classes".into()));
    }
    if n_samples < num_classes {
        return Err(Error::InvalidInput(
            "need at least one sample per class".into(),
        ));
    }
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if !(spread > 0.0) {
        return Err(Error::InvalidInput("spread must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spread).expect("positive spread");

    // Per-class counts differing by at most 1.
    let base = n_samples / num_classes;
    let extra = n_samples % num_classes;

    let mut train_features = Vec::new();
    let mut train_labels = Vec::new();
    let mut val_features = Vec::new();
    let mut val_labels = Vec::new();

    for class in 0..num_classes {
        let count = base + usize::from(class < extra);
        let center = blob_center(class, num_classes, dim);
        let val_count = count / 6;
        for s in 0..count {
            let point: Vec<f64> = center.iter().map(|c| c + normal.sample(&mut rng)).collect();
            if s < val_count {
                val_features.extend_from_slice(&point);
                val_labels.push(class as u32);
            } else {
                train_features.extend_from_slice(&point);
                train_labels.push(class as u32);
            }
        }
    }

    Ok(BlobSplit {
        train: Dataset::new(train_features, dim, train_labels, num_classes)?,
        val: Dataset::new(val_features, dim, val_labels, num_classes)?,
    })
}

/// Parses a CSV with header `f0,...,f{d-1},label`, features as 64-bit reals
/// and labels as nonnegative integers. The class count is inferred as
/// `max label + 1`. Rejects non-finite values; parse errors carry the
/// 1-based line number.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

fn parse_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols.last() != Some(&"label") {
        return Err(Error::Parse {
            line: 1,
            message: "header must be f0,...,f{d-1},label".into(),
        });
    }
    let d = cols.len() - 1;
    for (i, col) in cols[..d].iter().enumerate() {
        if *col != format!("f{i}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column f{i}, found {col:?}"),
            });
        }
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut max_label = 0u32;
    for (idx, row) in lines {
        let line = idx + 1;
        if row.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != d + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} cells, found {}", d + 1, cells.len()),
            });
        }
        for (i, cell) in cells[..d].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("feature f{i} is not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("feature f{i} is not finite: {cell:?}"),
                });
            }
            features.push(v);
        }
        let label: u32 = cells[d].parse().map_err(|_| Error::Parse {
            line,
            message: format!("label is not a nonnegative integer: {:?}", cells[d]),
        })?;
        max_label = max_label.max(label);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Dataset::new(features, d, labels, max_label as usize + 1)
}

const CKPT_MAGIC: &[u8; 8] = b"QRLXCKPT";
const CKPT_VERSION: u32 = 1;

/// Writes a float checkpoint: 16-byte header (magic `QRLXCKPT`, version u32,
/// n u32, both little-endian) followed by `n` 64-bit little-endian reals.
pub fn save_checkpoint(path: &Path, params: &[f64]) -> Result<()> {
    let n = u32::try_from(params.len())
        .map_err(|_| Error::InvalidInput("checkpoint too large for u32 length".into()))?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(CKPT_MAGIC)?;
    file.write_all(&CKPT_VERSION.to_le_bytes())?;
    file.write_all(&n.to_le_bytes())?;
    for v in params {
        file.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != CKPT_MAGIC {
        return Err(Error::InvalidInput(
            "not a checkpoint file (bad magic)".into(),
        ));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + 8 * n {
        return Err(Error::InvalidInput(format!(
            "checkpoint length {} does not match header n = {n}",
            bytes.len()
        )));
    }
    Ok(bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
