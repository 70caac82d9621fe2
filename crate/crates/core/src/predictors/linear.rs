//! Linear (MAC-chain) error predictor.
//!
//! The weights regress the scalar approximation error on the selected
//! features by ordinary least squares; an invocation is flagged when the
//! predicted error exceeds the decision threshold.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::view::TrainView;
use crate::dataset::{Dataset, FeatureId};
use crate::error::{Error, Result};

/// Where the decision threshold comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearThreshold {
    /// The dataset's label threshold.
    #[default]
    Label,
    /// Re-quantiled on training predictions so the predicted positive rate
    /// matches the training positive rate.
    Recalibrate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub selected_features: Vec<FeatureId>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub decision_threshold: f64,
    /// The design matrix was rank deficient; the minimum-norm fit was used.
    pub rank_deficient: bool,
}

/// Relative eigenvalue cut-off for the pseudo-inverse of the normal matrix.
const RANK_TOLERANCE: f64 = 1e-11;

/// Minimum-norm solution of `G w = b` for a symmetric positive
/// semi-definite `G`. Returns the solution and whether any direction was
/// dropped.
fn solve_min_norm(g: DMatrix<f64>, b: DVector<f64>) -> (DVector<f64>, bool) {
    let eig = SymmetricEigen::new(g);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let cutoff = max * RANK_TOLERANCE * eig.eigenvalues.len() as f64;
    let projected = eig.eigenvectors.transpose() * b;
    let mut dropped = false;
    let scaled = DVector::from_iterator(
        projected.len(),
        projected.iter().zip(eig.eigenvalues.iter()).map(|(&p, &l)| {
            if l > cutoff && l > 0.0 {
                p / l
            } else {
                dropped = true;
                0.0
            }
        }),
    );
    (&eig.eigenvectors * scaled, dropped)
}

impl LinearPredictor {
    pub fn fit(train: &Dataset, selected: &[FeatureId]) -> Result<Self> {
        Self::fit_view(&TrainView::new(train)?, selected, LinearThreshold::Label)
    }

    pub fn fit_view(
        view: &TrainView,
        selected: &[FeatureId],
        threshold: LinearThreshold,
    ) -> Result<Self> {
        if selected.is_empty() {
            return Err(Error::InvalidParameter(
                "linear predictor needs at least one feature".into(),
            ));
        }
        view.check_features(selected)?;
        let gram = view.gram();
        let idx: Vec<usize> = std::iter::once(0)
            .chain(selected.iter().map(|&f| f + 1))
            .collect();
        let p = idx.len();
        let g = DMatrix::from_fn(p, p, |r, c| gram.xtx[idx[r] * gram.dim + idx[c]]);
        let b = DVector::from_fn(p, |r, _| gram.xty[idx[r]]);
        let (w, rank_deficient) = solve_min_norm(g, b);
        if rank_deficient {
            log::debug!("rank-deficient design for features {selected:?}; using minimum-norm fit");
        }
        let mut predictor = Self {
            selected_features: selected.to_vec(),
            weights: w.iter().skip(1).copied().collect(),
            bias: w[0],
            decision_threshold: view.threshold(),
            rank_deficient,
        };
        if threshold == LinearThreshold::Recalibrate && !view.is_empty() {
            let mut predicted: Vec<f64> = (0..view.len())
                .map(|i| predictor.predict_error_at(view, i))
                .collect();
            predicted.sort_by(f64::total_cmp);
            let rate = view.positives() as f64 / view.len() as f64;
            let h = (predicted.len() - 1) as f64 * (1.0 - rate);
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            predictor.decision_threshold =
                predicted[lo] + (h - lo as f64) * (predicted[hi] - predicted[lo]);
        }
        Ok(predictor)
    }

    pub fn predict_error(&self, features: &[f64]) -> f64 {
        self.bias
            + self
                .selected_features
                .iter()
                .zip(&self.weights)
                .map(|(&f, &w)| w * features[f])
                .sum::<f64>()
    }

    pub(crate) fn predict_error_at(&self, view: &TrainView, i: usize) -> f64 {
        self.bias
            + self
                .selected_features
                .iter()
                .zip(&self.weights)
                .map(|(&f, &w)| w * view.column(f)[i])
                .sum::<f64>()
    }

    pub fn predict(&self, features: &[f64]) -> bool {
        self.predict_error(features) > self.decision_threshold
    }

    pub(crate) fn predict_at(&self, view: &TrainView, i: usize) -> bool {
        self.predict_error_at(view, i) > self.decision_threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureDescriptor, FeatureRole, Sample};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: Vec<(Vec<f64>, f64)>, threshold: f64) -> Dataset {
        let f = rows.first().map_or(0, |r| r.0.len());
        let mut d = Dataset {
            descriptors: (0..f)
                .map(|i| FeatureDescriptor {
                    feature_id: i,
                    node_id: i,
                    availability_cycle: 1,
                    role: FeatureRole::Input,
                })
                .collect(),
            samples: rows
                .into_iter()
                .map(|(features, error)| Sample {
                    features,
                    error,
                    label: false,
                })
                .collect(),
            labeling: None,
        };
        d.apply_threshold(threshold, 0.1);
        d
    }

    #[test]
    fn recovers_exact_linear_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = (0..200)
            .map(|_| {
                let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                let e = 2.0 * x[3];
                (x, e)
            })
            .collect();
        let p = LinearPredictor::fit(&dataset(rows, 0.5), &[3]).unwrap();
        assert!((p.weights[0] - 2.0).abs() < 1e-9);
        assert!(p.bias.abs() < 1e-9);
        assert!(!p.rank_deficient);
    }

    #[test]
    fn constant_column_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<(Vec<f64>, f64)> = (0..100)
            .map(|_| {
                let x = rng.random_range(-1.0..1.0);
                (vec![x, 3.0], 0.5 * x + 1.0)
            })
            .collect();
        let d = dataset(rows.clone(), 1.0);
        let with = LinearPredictor::fit(&d, &[0, 1]).unwrap();
        let without = LinearPredictor::fit(&d, &[0]).unwrap();
        assert!(with.rank_deficient);
        for (x, _) in &rows {
            assert!((with.predict_error(x) - without.predict_error(x)).abs() < 1e-9);
            assert_eq!(with.predict(x), without.predict(x));
        }
        // Minimum norm splits the intercept between the bias and the
        // constant column in proportion 1 : 3.
        assert!((with.weights[1] - 3.0 * with.bias).abs() < 1e-9);
    }

    #[test]
    fn singular_design_does_not_fail() {
        let rows = vec![(vec![1.0, 1.0], 0.0); 10];
        let p = LinearPredictor::fit(&dataset(rows, 0.5), &[0, 1]).unwrap();
        assert!(p.rank_deficient);
        assert!(p.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn rejects_empty_and_unknown() {
        let rows = vec![(vec![1.0], 0.0); 3];
        let d = dataset(rows, 0.5);
        assert!(LinearPredictor::fit(&d, &[]).is_err());
        assert!(matches!(LinearPredictor::fit(&d, &[4]), Err(Error::UnknownFeature(4))));
    }

    #[test]
    fn recalibration_matches_positive_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<(Vec<f64>, f64)> = (0..1000)
            .map(|_| {
                let x: f64 = rng.random_range(0.0..1.0);
                (vec![x], x * x)
            })
            .collect();
        let d = dataset(rows, 0.81);
        let view = TrainView::new(&d).unwrap();
        let p = LinearPredictor::fit_view(&view, &[0], LinearThreshold::Recalibrate).unwrap();
        let flagged = (0..view.len()).filter(|&i| p.predict_at(&view, i)).count();
        let positives = view.positives();
        assert!((flagged as i64 - positives as i64).abs() <= 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn residual_is_orthogonal(seed in any::<u64>(), p in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<(Vec<f64>, f64)> = (0..120)
                .map(|_| {
                    let x: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
                    let e = x.iter().map(|v| v.sin()).sum::<f64>() + rng.random_range(-0.1..0.1);
                    (x, e)
                })
                .collect();
            let d = dataset(rows.clone(), 0.0);
            let selected: Vec<usize> = (0..p).collect();
            let fit = LinearPredictor::fit(&d, &selected).unwrap();
            let mut xtr = vec![0.0; p + 1];
            for (x, e) in &rows {
                let r = e - fit.predict_error(x);
                xtr[0] += r;
                for j in 0..p {
                    xtr[j + 1] += x[j] * r;
                }
            }
            for v in xtr {
                prop_assert!(v.abs() < 1e-6, "Xᵀr component {}", v);
            }
        }
    }
}
