//! Seeded Gaussian-blob classification data.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::random::{seeded, standard_normal, Rng};

/// Fraction of the generated samples held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `samples x features`.
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.len() != inputs.rows() {
            return Err(Error::InvalidArgument(
                "one label per input row is required",
            ));
        }
        if labels.iter().any(|&y| y >= classes) {
            return Err(Error::InvalidArgument("label out of range"));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.cols()
    }

    /// Rows selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<(Matrix, Vec<usize>)> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty batch"));
        }
        let x = Matrix::from_fn(indices.len(), self.features(), |i, j| {
            self.inputs.get(indices[i], j)
        })?;
        Ok((x, indices.iter().map(|&i| self.labels[i]).collect()))
    }
}

/// Class-conditional Gaussians with per-feature scaling.
///
/// A sample of class `c` is `(μ_c + spread·z) ∘ s` with `z ~ N(0, I)`,
/// centres `μ_c ~ N(0, separation²·I)` and feature scales `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub features: usize,
    pub samples_per_class: usize,
    pub separation: f64,
    pub spread: f64,
    /// One scale per feature; anisotropy here shapes `λ_max(XᵀX)`.
    pub feature_scales: Vec<f64>,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        let features = 16;
        Self {
            classes: 3,
            features,
            samples_per_class: 400,
            separation: 0.5,
            spread: 1.0,
            feature_scales: geometric_scales(features, 1.0, 15.0),
            seed: 0,
        }
    }
}

/// `n` scales spaced geometrically from `lo` to `hi`.
pub fn geometric_scales(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![lo];
    }
    (0..n)
        .map(|i| lo * libm::pow(hi / lo, i as f64 / (n - 1) as f64))
        .collect()
}

/// Training and validation halves of a generated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub validation: Dataset,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.features == 0 || self.samples_per_class < 5 {
            return Err(Error::InvalidArgument(
                "blobs need ≥2 classes, ≥1 feature and ≥5 samples per class",
            ));
        }
        if self.feature_scales.len() != self.features {
            return Err(Error::InvalidArgument(
                "feature_scales needs one entry per feature",
            ));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.spread)
            || !(self.separation >= 0.0)
            || !self.feature_scales.iter().all(|&s| positive(s))
        {
            return Err(Error::InvalidArgument(
                "spread and feature scales must be positive",
            ));
        }
        Ok(())
    }

    /// Deterministic shuffled data set with the validation split carved off
    /// the end.
    pub fn generate(&self) -> Result<Split> {
        self.validate()?;
        let mut rng = seeded(self.seed);
        let centres: Vec<Vec<f64>> = (0..self.classes)
            .map(|_| {
                (0..self.features)
                    .map(|_| self.separation * standard_normal(&mut rng))
                    .collect()
            })
            .collect();
        let total = self.classes * self.samples_per_class;
        let mut labels: Vec<usize> = (0..total).map(|i| i % self.classes).collect();
        shuffle(&mut rng, &mut labels);
        let mut data = Vec::with_capacity(total * self.features);
        for &y in &labels {
            for (j, s) in self.feature_scales.iter().enumerate() {
                data.push((centres[y][j] + self.spread * standard_normal(&mut rng)) * s);
            }
        }
        let inputs = Matrix::new(total, self.features, data)?;
        let n_val = libm::round(VALIDATION_FRACTION * total as f64) as usize;
        let n_train = total - n_val;
        let part = |range: core::ops::Range<usize>| -> Result<Dataset> {
            let idx: Vec<usize> = range.collect();
            let (x, y) =
                Dataset::new(inputs.clone(), labels.clone(), self.classes)?.select(&idx)?;
            Dataset::new(x, y, self.classes)
        };
        Ok(Split {
            train: part(0..n_train)?,
            validation: part(n_train..total)?,
        })
    }
}

/// Fisher–Yates shuffle.
pub fn shuffle<T>(rng: &mut Rng, items: &mut [T]) {
    use rand::Rng as _;
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
