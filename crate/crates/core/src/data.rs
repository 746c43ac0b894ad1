//! Datasets: seeded synthetic Gaussian blobs and the IDX container used by MNIST.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid dataset argument: {0}")]
    InvalidArgs(&'static str),
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: String, expected: u32, found: u32 },
    #[error("{path}: truncated file ({needed} bytes needed, {available} present)")]
    Truncated { path: String, needed: usize, available: usize },
    #[error("image file holds {images} samples but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Row-major feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub dims: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dims: usize, classes: usize) -> Result<Self, DataError> {
        if features.len() != labels.len() * dims {
            return Err(DataError::InvalidArgs("feature matrix does not match label count"));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(DataError::LabelOutOfRange { label, classes });
        }
        Ok(Self {
            features,
            labels,
            dims,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    /// Copies the given rows into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dims: self.dims,
            classes: self.classes,
        }
    }

    /// Keeps the first `n` samples.
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            features: self.features[..n * self.dims].to_vec(),
            labels: self.labels[..n].to_vec(),
            dims: self.dims,
            classes: self.classes,
        }
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }
}

/// Gaussian blobs around random class centers in the unit cube, min-max
/// normalized per feature to `[0, 1]`. Samples are interleaved by class.
pub fn synth_blobs(classes: usize, dims: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset, DataError> {
    if classes < 2 {
        return Err(DataError::InvalidArgs("classes must be at least 2"));
    }
    if dims == 0 || per_class == 0 {
        return Err(DataError::InvalidArgs("dims and per_class must be positive"));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(DataError::InvalidArgs("spread must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dims).map(|_| rng.random::<f64>()).collect())
        .collect();
    let noise = Normal::new(0.0, spread).expect("spread validated");

    let n = classes * per_class;
    let mut features = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..per_class {
        for (c, center) in centers.iter().enumerate() {
            features.extend(center.iter().map(|&m| m + noise.sample(&mut rng)));
            labels.push(c);
        }
    }

    for d in 0..dims {
        let column = (0..n).map(|i| features[i * dims + d]);
        let (lo, hi) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        for i in 0..n {
            let v = &mut features[i * dims + d];
            *v = if span > 0.0 { (*v - lo) / span } else { 0.5 };
        }
    }
    Dataset::new(features, labels, dims, classes)
}

fn read_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32, DataError> {
    let chunk = bytes.get(offset..offset + 4).ok_or(DataError::Truncated {
        path: path.to_string(),
        needed: offset + 4,
        available: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4-byte slice")))
}

fn expect_magic(bytes: &[u8], expected: u32, path: &str) -> Result<(), DataError> {
    let found = read_u32(bytes, 0, path)?;
    if found != expected {
        return Err(DataError::BadMagic {
            path: path.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Parses an IDX image file (`0x00000803`, count, rows, cols, pixels) and
/// an IDX label file (`0x00000801`, count, labels). Pixels scale to `[0, 1]`.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8], image_name: &str, label_name: &str) -> Result<Dataset, DataError> {
    expect_magic(image_bytes, IMAGE_MAGIC, image_name)?;
    expect_magic(label_bytes, LABEL_MAGIC, label_name)?;

    let images = read_u32(image_bytes, 4, image_name)? as usize;
    let rows = read_u32(image_bytes, 8, image_name)? as usize;
    let cols = read_u32(image_bytes, 12, image_name)? as usize;
    let labels = read_u32(label_bytes, 4, label_name)? as usize;
    if images != labels {
        return Err(DataError::CountMismatch { images, labels });
    }

    let dims = rows * cols;
    let pixels = image_bytes.get(16..16 + images * dims).ok_or(DataError::Truncated {
        path: image_name.to_string(),
        needed: 16 + images * dims,
        available: image_bytes.len(),
    })?;
    let label_payload = label_bytes.get(8..8 + labels).ok_or(DataError::Truncated {
        path: label_name.to_string(),
        needed: 8 + labels,
        available: label_bytes.len(),
    })?;

    let labels: Vec<usize> = label_payload.iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(10);
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    Dataset::new(features, labels, dims, classes)
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    parse_idx(&read_file(ip)?, &read_file(lp)?, &ip.display().to_string(), &lp.display().to_string())
}

/// Serializes a dataset as IDX image/label byte streams. Features are
/// quantized to bytes; `rows * cols` must equal the feature width.
pub fn to_idx_bytes(data: &Dataset, rows: usize, cols: usize) -> Result<(Vec<u8>, Vec<u8>), DataError> {
    if rows * cols != data.dims {
        return Err(DataError::InvalidArgs("rows * cols must equal the feature width"));
    }
    if data.classes > 256 {
        return Err(DataError::InvalidArgs("IDX labels are single bytes"));
    }
    let n = data.len() as u32;
    let mut images = Vec::with_capacity(16 + data.features.len());
    for word in [IMAGE_MAGIC, n, rows as u32, cols as u32] {
        images.extend_from_slice(&word.to_be_bytes());
    }
    images.extend(data.features.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));

    let mut labels = Vec::with_capacity(8 + data.len());
    labels.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend(data.labels.iter().map(|&l| l as u8));
    Ok((images, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_shape_and_balance() {
        let d = synth_blobs(2, 3, 10, 0.1, 1).unwrap();
        assert_eq!(d.len(), 20);
        assert_eq!(d.class_histogram(), vec![10, 10]);
        assert!(d.features.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn blobs_deterministic() {
        assert_eq!(synth_blobs(3, 4, 5, 0.2, 9).unwrap(), synth_blobs(3, 4, 5, 0.2, 9).unwrap());
        assert_ne!(synth_blobs(3, 4, 5, 0.2, 9).unwrap(), synth_blobs(3, 4, 5, 0.2, 10).unwrap());
    }

    #[test]
    fn blobs_tiny_spread_collapses_classes() {
        let d = synth_blobs(3, 4, 6, 1e-12, 2).unwrap();
        for i in 0..d.len() {
            for j in 0..d.len() {
                if d.labels[i] == d.labels[j] {
                    let gap: f64 = d.row(i).iter().zip(d.row(j)).map(|(a, b)| (a - b).abs()).sum();
                    assert!(gap < 1e-6);
                }
            }
        }
    }

    #[test]
    fn blobs_invalid_args() {
        assert!(synth_blobs(1, 2, 3, 0.1, 0).is_err());
        assert!(synth_blobs(2, 0, 3, 0.1, 0).is_err());
        assert!(synth_blobs(2, 2, 0, 0.1, 0).is_err());
        assert!(synth_blobs(2, 2, 3, 0.0, 0).is_err());
    }

    fn sample_idx() -> (Vec<u8>, Vec<u8>) {
        let d = Dataset::new(vec![0.0, 1.0, 0.5, 0.25, 1.0, 0.0, 0.0, 1.0], vec![3, 7], 4, 10).unwrap();
        to_idx_bytes(&d, 2, 2).unwrap()
    }

    #[test]
    fn idx_round_trip() {
        let (img, lbl) = sample_idx();
        let d = parse_idx(&img, &lbl, "img", "lbl").unwrap();
        assert_eq!(d.labels, vec![3, 7]);
        assert_eq!(d.dims, 4);
        assert_eq!(d.classes, 10);
        assert!((d.features[2] - 128.0 / 255.0).abs() < 1e-12);
        assert_eq!(d.features[1], 1.0);
    }

    #[test]
    fn idx_wrong_magic() {
        let (img, _) = sample_idx();
        // An image file passed as the label file.
        let err = parse_idx(&img, &img, "img", "lbl").unwrap_err();
        assert!(matches!(err, DataError::BadMagic { found: 0x0000_0803, .. }), "{err}");
    }

    #[test]
    fn idx_truncated_payload() {
        let (img, lbl) = sample_idx();
        let err = parse_idx(&img[..img.len() - 1], &lbl, "img", "lbl").unwrap_err();
        assert!(matches!(err, DataError::Truncated { .. }));
        let err = parse_idx(&img[..6], &lbl, "img", "lbl").unwrap_err();
        assert!(matches!(err, DataError::Truncated { .. }));
    }

    #[test]
    fn idx_count_mismatch() {
        let (img, mut lbl) = sample_idx();
        lbl[7] = 3;
        let err = parse_idx(&img, &lbl, "img", "lbl").unwrap_err();
        assert!(matches!(err, DataError::CountMismatch { images: 2, labels: 3 }));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_idx("/nonexistent/a", "/nonexistent/b"), Err(DataError::Io { .. })));
    }
}
