//! Column-major training view with lazily built per-feature sort orders and
//! Gram matrix, shared by every predictor trained during one selection run.

use std::sync::OnceLock;

use crate::dataset::{Dataset, FeatureId};
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct TrainView {
    columns: Vec<Vec<f64>>,
    labels: Vec<bool>,
    errors: Vec<f64>,
    threshold: f64,
    sorted: OnceLock<Vec<Vec<u32>>>,
    gram: OnceLock<Gram>,
}

/// `[1 X]ᵀ[1 X]` and `[1 X]ᵀ e`; index 0 is the bias column.
#[derive(Debug)]
pub(crate) struct Gram {
    pub dim: usize,
    pub xtx: Vec<f64>,
    pub xty: Vec<f64>,
}

impl TrainView {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        let threshold = dataset.threshold()?;
        let f = dataset.feature_count();
        let mut columns = vec![Vec::with_capacity(dataset.len()); f];
        for s in &dataset.samples {
            if s.features.len() != f {
                return Err(Error::LengthMismatch {
                    expected: f,
                    got: s.features.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(&s.features) {
                col.push(v);
            }
        }
        Ok(Self {
            columns,
            labels: dataset.samples.iter().map(|s| s.label).collect(),
            errors: dataset.errors(),
            threshold,
            sorted: OnceLock::new(),
            gram: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, f: FeatureId) -> &[f64] {
        &self.columns[f]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn check_features(&self, features: &[FeatureId]) -> Result<()> {
        match features.iter().find(|&&f| f >= self.columns.len()) {
            Some(&f) => Err(Error::UnknownFeature(f)),
            None => Ok(()),
        }
    }

    /// Sample indices ordered by each feature's value (stable).
    pub(crate) fn presorted(&self) -> &[Vec<u32>] {
        self.sorted.get_or_init(|| {
            self.columns
                .iter()
                .map(|col| {
                    let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                    idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                    idx
                })
                .collect()
        })
    }

    pub(crate) fn gram(&self) -> &Gram {
        self.gram.get_or_init(|| {
            let dim = self.columns.len() + 1;
            let n = self.len();
            let col = |j: usize| -> Option<&[f64]> {
                if j == 0 {
                    None
                } else {
                    Some(&self.columns[j - 1])
                }
            };
            let mut xtx = vec![0.0; dim * dim];
            let mut xty = vec![0.0; dim];
            for a in 0..dim {
                for b in a..dim {
                    let v = match (col(a), col(b)) {
                        (None, None) => n as f64,
                        (None, Some(c)) | (Some(c), None) => c.iter().sum(),
                        (Some(c), Some(d)) => c.iter().zip(d).map(|(x, y)| x * y).sum(),
                    };
                    xtx[a * dim + b] = v;
                    xtx[b * dim + a] = v;
                }
                xty[a] = match col(a) {
                    None => self.errors.iter().sum(),
                    Some(c) => c.iter().zip(&self.errors).map(|(x, e)| x * e).sum(),
                };
            }
            Gram { dim, xtx, xty }
        })
    }
}
