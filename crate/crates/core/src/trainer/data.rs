//! Datasets: the bundled 8x8 digits, IDX files, and synthetic blobs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::snapshot::Matrix;

const DIGITS_CSV: &str = include_str!("../../data/digits8x8.csv");
const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// Labelled inputs. Every input coordinate lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    /// `inputs` holds one sample per row. `classes` must exceed every label.
    pub fn new(inputs: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::Validation("dataset has no samples".into()));
        }
        if labels.len() != inputs.rows() {
            return Err(Error::Validation(format!(
                "{} labels for {} samples",
                labels.len(),
                inputs.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Validation(format!("label {bad} outside [0, {classes})")));
        }
        if let Some(pos) = inputs.as_slice().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation(format!(
                "input ({}, {}) = {} outside [0, 1]",
                pos / inputs.cols(),
                pos % inputs.cols(),
                inputs.as_slice()[pos]
            )));
        }
        Ok(Self { inputs, labels, classes })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        (self.inputs.row(i), self.labels[i])
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.dim());
        for &i in idx {
            data.extend_from_slice(self.inputs.row(i));
        }
        Self::new(
            Matrix::new(idx.len(), self.dim(), data)?,
            idx.iter().map(|&i| self.labels[i]).collect(),
            self.classes,
        )
    }

    /// Shuffles with `seed` and cuts off the first `train_fraction` as the
    /// training part.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Argument(format!("train fraction {train_fraction} not in (0, 1)")));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = ((self.len() as f64) * train_fraction).round() as usize;
        let cut = cut.clamp(1, self.len().saturating_sub(1).max(1));
        Ok((self.subset(&order[..cut])?, self.subset(&order[cut..])?))
    }
}

/// Scales each column to `[0, 1]` by its own min and max. Constant columns
/// become 0.
pub fn min_max_normalize(m: &mut Matrix) {
    for c in 0..m.cols() {
        let (lo, hi) = (0..m.rows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            let v = m.get(r, c);
            (lo.min(v), hi.max(v))
        });
        let span = hi - lo;
        for r in 0..m.rows() {
            let v = if span > 0.0 { ((m.get(r, c) - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
            m.set(r, c, v);
        }
    }
}

/// Parses a CSV with a header row, feature columns, and the class label in
/// the last column. Features are min-max normalized per column.
pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let n = row.len();
        if n < 2 {
            return Err(Error::Format(format!("row {i}: need features and a label")));
        }
        if *dim.get_or_insert(n - 1) != n - 1 {
            return Err(Error::Format(format!("row {i}: {} columns, expected {}", n, dim.unwrap() + 1)));
        }
        for field in row.iter().take(n - 1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {i}: bad number {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::Format(format!("row {i}: non-finite feature")));
            }
            data.push(v);
        }
        let label: usize = row[n - 1]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("row {i}: bad label {:?}", &row[n - 1])))?;
        labels.push(label);
    }
    let dim = dim.ok_or_else(|| Error::Format("csv has no data rows".into()))?;
    let mut inputs = Matrix::new(labels.len(), dim, data)?;
    min_max_normalize(&mut inputs);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(inputs, labels, classes)
}

/// The bundled 8x8 handwritten digits (1797 samples, 64 features, 10 classes).
pub fn bundled_digits() -> Dataset {
    dataset_from_csv(DIGITS_CSV).expect("bundled dataset is well formed")
}

/// Deterministic 80/20 train/eval split of [`bundled_digits`].
pub fn bundled_digits_split() -> (Dataset, Dataset) {
    bundled_digits().split(0.8, 0).expect("valid split")
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("idx header truncated".into()))
}

/// Parses an IDX image file (`0x00000803`) into an `n x (rows*cols)` matrix
/// scaled to `[0, 1]`.
pub fn read_idx_images(bytes: &[u8]) -> Result<Matrix> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES {
        return Err(Error::Format(format!("idx image magic {magic:#010x}, expected {IDX_IMAGES:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let dim = be_u32(bytes, 8)? as usize * be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * dim {
        return Err(Error::Format(format!("idx image payload has {} bytes, expected {}", body.len(), n * dim)));
    }
    Matrix::new(n, dim, body.iter().map(|&b| b as f64 / 255.0).collect())
}

/// Parses an IDX label file (`0x00000801`).
pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS {
        return Err(Error::Format(format!("idx label magic {magic:#010x}, expected {IDX_LABELS:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::Format(format!("idx label payload has {} bytes, expected {n}", body.len())));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

/// Pairs an IDX image file with its label file. Classes are `max label + 1`.
pub fn dataset_from_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let inputs = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(inputs, labels, classes)
}

/// Isotropic Gaussian clusters, one per class, with centers drawn uniformly
/// in the unit cube. Inputs are min-max normalized afterwards.
pub fn gaussian_blobs(per_class: usize, classes: usize, dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if per_class == 0 || classes == 0 || dim == 0 {
        return Err(Error::Argument("blob counts must be positive".into()));
    }
    let noise = Normal::new(0.0, spread).map_err(|e| Error::Argument(format!("spread: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| rand::Rng::random::<f64>(&mut rng)).collect())
        .collect();
    let mut data = Vec::with_capacity(per_class * classes * dim);
    let mut labels = Vec::with_capacity(per_class * classes);
    for i in 0..per_class * classes {
        let k = i % classes;
        data.extend(centers[k].iter().map(|c| c + noise.sample(&mut rng)));
        labels.push(k);
    }
    let mut inputs = Matrix::new(labels.len(), dim, data)?;
    min_max_normalize(&mut inputs);
    Dataset::new(inputs, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(magic: u32, dims: &[u32], body: &[u8]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(body);
        out
    }

    #[test]
    fn bundled_digits_shape() {
        let d = bundled_digits();
        assert_eq!((d.len(), d.dim(), d.classes()), (1797, 64, 10));
        let (train, eval) = bundled_digits_split();
        assert_eq!(train.len() + eval.len(), 1797);
        assert_eq!(train.len(), 1438);
        assert_eq!(bundled_digits_split().0, train);
    }

    #[test]
    fn out_of_range_inputs_rejected() {
        let m = Matrix::new(1, 2, vec![0.5, 1.5]).unwrap();
        assert!(matches!(Dataset::new(m, vec![0], 1), Err(Error::Validation(_))));
        let m = Matrix::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(Dataset::new(m, vec![3], 2).is_err());
    }

    #[test]
    fn idx_round_trip() {
        let images = idx(IDX_IMAGES, &[2, 1, 2], &[0, 255, 51, 102]);
        let labels = idx(IDX_LABELS, &[2], &[7, 1]);
        let d = dataset_from_idx(&images, &labels).unwrap();
        assert_eq!(d.inputs().to_rows(), vec![vec![0.0, 1.0], vec![0.2, 0.4]]);
        assert_eq!(d.labels(), &[7, 1]);
        assert_eq!(d.classes(), 8);
        assert!(read_idx_images(&labels).is_err());
        assert!(read_idx_labels(&labels[..9]).is_err());
    }

    #[test]
    fn blobs_are_deterministic_and_normalized() {
        let a = gaussian_blobs(20, 3, 5, 0.1, 9).unwrap();
        assert_eq!(a, gaussian_blobs(20, 3, 5, 0.1, 9).unwrap());
        assert_eq!(a.len(), 60);
        assert!(a.inputs().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn csv_normalizes_per_column() {
        let d = dataset_from_csv("a,b,label\n0,10,0\n5,10,1\n10,10,1\n").unwrap();
        assert_eq!(d.inputs().to_rows(), vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]]);
        assert!(dataset_from_csv("a,label\nx,0\n").is_err());
    }
}
