//! IDX file reading/writing and labelled/unlabelled subset sampling.
//!
//! Files may be gzip-compressed; compression is detected from the content,
//! not the file name.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Dataset;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

fn check_header(path: &Path, bytes: &[u8], magic: u32, header_len: usize) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::Length {
            path: path.into(),
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let observed = be_u32(bytes, 0);
    if observed != magic {
        return Err(Error::Format {
            path: path.into(),
            observed,
            expected: magic,
        });
    }
    if bytes.len() < header_len {
        return Err(Error::Length {
            path: path.into(),
            expected: header_len,
            actual: bytes.len(),
        });
    }
    Ok(())
}

fn check_payload(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() != expected {
        return Err(Error::Length {
            path: path.into(),
            expected,
            actual: bytes.len(),
        });
    }
    Ok(())
}

/// Loads an IDX image file as an `(rows·cols) × count` matrix scaled to
/// `[0, 1]`. Each column holds one image's bytes in file order.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    check_header(path, &bytes, IMAGE_MAGIC, 16)?;
    let count = be_u32(&bytes, 4) as usize;
    let rows = be_u32(&bytes, 8) as usize;
    let cols = be_u32(&bytes, 12) as usize;
    let pixels = rows * cols;
    check_payload(path, &bytes, 16 + count * pixels)?;
    let payload = &bytes[16..];
    Ok(Array2::from_shape_fn((pixels, count), |(i, j)| {
        payload[j * pixels + i] as f64 / 255.0
    }))
}

/// Loads an IDX label file. Labels must lie in `0..=9`.
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    check_header(path, &bytes, LABEL_MAGIC, 8)?;
    let count = be_u32(&bytes, 4) as usize;
    check_payload(path, &bytes, 8 + count)?;
    let labels = bytes[8..].to_vec();
    if let Some((position, &value)) = labels.iter().enumerate().find(|(_, &v)| v > 9) {
        return Err(Error::Value {
            path: path.into(),
            position,
            value,
        });
    }
    Ok(labels)
}

/// Writes images (one per column of `pixels`, `rows·cols` bytes each) as an
/// uncompressed IDX file.
pub fn write_idx_images(path: impl AsRef<Path>, pixels: ArrayView2<u8>, rows: usize, cols: usize) -> Result<()> {
    let path = path.as_ref();
    if pixels.nrows() != rows * cols {
        return Err(Error::invalid(format!(
            "{} pixels per image do not match {rows}x{cols}",
            pixels.nrows()
        )));
    }
    let mut bytes = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, pixels.ncols() as u32, rows as u32, cols as u32] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    for image in pixels.columns() {
        bytes.extend(image.iter());
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

/// Source indices of a sampled subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Picks a class-stratified labelled block and a uniformly drawn unlabelled
/// block from the remaining samples.
///
/// Every class gets `n_train / c` labelled samples and the first
/// `n_train % c` classes one more, where `c` is one more than the largest
/// label present.
pub fn sample_subset_indices(labels: &[u8], n_train: usize, n_test: usize, seed: u64) -> Result<SubsetIndices> {
    let n_classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    if n_train < n_classes || n_classes < 2 {
        return Err(Error::CannotStratify {
            n_train,
            n_classes,
            reason: "need at least two classes and one labelled sample per class".into(),
        });
    }
    if n_train + n_test > labels.len() {
        return Err(Error::invalid(format!(
            "n_train + n_test = {} exceeds the {} available samples",
            n_train + n_test,
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        pools[l as usize].push(i);
    }
    let base = n_train / n_classes;
    let extra = n_train % n_classes;
    let mut taken = vec![false; labels.len()];
    let mut train = Vec::with_capacity(n_train);
    for (class, pool) in pools.iter_mut().enumerate() {
        let quota = base + usize::from(class < extra);
        if pool.len() < quota {
            return Err(Error::CannotStratify {
                n_train,
                n_classes,
                reason: format!("class {class} has {} samples, needs {quota}", pool.len()),
            });
        }
        pool.shuffle(&mut rng);
        for &i in &pool[..quota] {
            taken[i] = true;
            train.push(i);
        }
    }
    train.shuffle(&mut rng);
    let mut rest: Vec<usize> = (0..labels.len()).filter(|&i| !taken[i]).collect();
    rest.shuffle(&mut rng);
    rest.truncate(n_test);
    Ok(SubsetIndices { train, test: rest })
}

/// Builds a [`Dataset`] from a sampled subset, with ground-truth labels of
/// the unlabelled block attached for evaluation.
pub fn sample_subset(
    images: ArrayView2<f64>,
    labels: &[u8],
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<Dataset> {
    subset_dataset(images, labels, &sample_subset_indices(labels, n_train, n_test, seed)?)
}

pub fn subset_dataset(images: ArrayView2<f64>, labels: &[u8], indices: &SubsetIndices) -> Result<Dataset> {
    if images.ncols() != labels.len() {
        return Err(Error::invalid(format!(
            "{} images but {} labels",
            images.ncols(),
            labels.len()
        )));
    }
    let n_classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let order: Vec<usize> = indices.train.iter().chain(&indices.test).copied().collect();
    let x = images.select(Axis(1), &order);
    let train_labels: Vec<usize> = indices.train.iter().map(|&i| labels[i] as usize).collect();
    let test_labels: Vec<usize> = indices.test.iter().map(|&i| labels[i] as usize).collect();
    Dataset::from_labels(x, &train_labels, n_classes)?.with_test_labels(test_labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stratified_quotas_with_remainder() {
        let labels: Vec<u8> = (0..60).map(|i| (i % 3) as u8).collect();
        let idx = sample_subset_indices(&labels, 7, 10, 4).unwrap();
        let mut counts = [0; 3];
        for &i in &idx.train {
            counts[labels[i] as usize] += 1;
        }
        assert_eq!(counts, [3, 2, 2]);
        assert_eq!(idx.test.len(), 10);
        assert!(idx.test.iter().all(|i| !idx.train.contains(i)));
    }

    #[test]
    fn too_few_labels_cannot_stratify() {
        let labels: Vec<u8> = (0..20).map(|i| (i % 10) as u8).collect();
        assert!(matches!(
            sample_subset_indices(&labels, 9, 0, 0),
            Err(Error::CannotStratify { .. })
        ));
    }

    #[test]
    fn oversized_request_is_rejected() {
        let labels = vec![0u8, 1, 0, 1];
        assert!(sample_subset_indices(&labels, 2, 3, 0).is_err());
    }
}
