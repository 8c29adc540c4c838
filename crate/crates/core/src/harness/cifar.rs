//! CIFAR-10 binary batches and patch extraction for the RICA experiment.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const SIDE: usize = 32;
pub const CHANNELS: usize = 3;
pub const RECORD_BYTES: usize = 1 + SIDE * SIDE * CHANNELS;

/// Luma of pixel `(row, col)` in a 3072-value image row (R, G and B planes
/// of 32×32 each).
pub fn gray(image: &[f64], row: usize, col: usize) -> f64 {
    let i = row * SIDE + col;
    let plane = SIDE * SIDE;
    0.299 * image[i] + 0.587 * image[plane + i] + 0.114 * image[2 * plane + i]
}

/// One image per row, pixels scaled to `[0, 1]`. Labels are checked and
/// dropped.
pub fn parse_cifar10(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.is_empty() {
        return Err(Error::Data("CIFAR-10 file is empty".into()));
    }
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::Data(format!(
            "CIFAR-10 file length {} is not a multiple of {RECORD_BYTES}",
            bytes.len()
        )));
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut out = DMatrix::zeros(n, RECORD_BYTES - 1);
    for (i, rec) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        if rec[0] > 9 {
            return Err(Error::Data(format!("record {i} has label {}", rec[0])));
        }
        for (j, &b) in rec[1..].iter().enumerate() {
            out[(i, j)] = b as f64 / 255.0;
        }
    }
    Ok(out)
}

pub fn load_cifar10(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    parse_cifar10(&bytes)
}

/// `n` random grayscale `patch × patch` crops, one per row, each with its
/// own mean removed.
pub fn sample_patches(images: &DMatrix<f64>, patch: usize, n: usize, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    if images.nrows() == 0 {
        return Err(Error::Data("no images to sample patches from".into()));
    }
    if images.ncols() != RECORD_BYTES - 1 {
        return Err(Error::Data("image rows must have 3072 values".into()));
    }
    if patch == 0 || patch > SIDE {
        return Err(Error::invalid(format!("patch side must be in 1..={SIDE}")));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one patch"));
    }
    let p = patch * patch;
    let mut out = DMatrix::zeros(n, p);
    for r in 0..n {
        let img: Vec<f64> = images.row(rng.random_range(0..images.nrows())).iter().copied().collect();
        let top = rng.random_range(0..=SIDE - patch);
        let left = rng.random_range(0..=SIDE - patch);
        for a in 0..patch {
            for b in 0..patch {
                out[(r, a * patch + b)] = gray(&img, top + a, left + b);
            }
        }
        let mean = out.row(r).sum() / p as f64;
        out.row_mut(r).add_scalar_mut(-mean);
    }
    Ok(out)
}
