//! Error predictors: a linear MAC chain and a position-constrained decision
//! tree, plus the metrics used to score them.

mod linear;
mod metrics;
mod tree;
mod view;

pub use linear::{LinearPredictor, LinearThreshold};
pub use metrics::Metrics;
pub use tree::{check_tree_constraints, DecisionTree, TreeNode, TreeParams, TreeViolation};
pub use view::TrainView;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::sizing::PredictorKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Predictor {
    Linear(LinearPredictor),
    Tree(DecisionTree),
}

impl Predictor {
    pub fn kind(&self) -> PredictorKind {
        match self {
            Predictor::Linear(_) => PredictorKind::Linear,
            Predictor::Tree(_) => PredictorKind::Tree,
        }
    }

    pub fn predict(&self, features: &[f64]) -> bool {
        match self {
            Predictor::Linear(p) => p.predict(features),
            Predictor::Tree(t) => t.predict(features),
        }
    }

    pub(crate) fn predict_at(&self, view: &TrainView, i: usize) -> bool {
        match self {
            Predictor::Linear(p) => p.predict_at(view, i),
            Predictor::Tree(t) => t.predict_at(view, i),
        }
    }

    /// Scores the predictor against the labels of `data`.
    pub fn evaluate(&self, data: &Dataset) -> Result<Metrics> {
        if data.labeling.is_none() {
            return Err(Error::Unlabeled);
        }
        Ok(Metrics::from_pairs(
            data.samples
                .iter()
                .map(|s| (s.label, self.predict(&s.features))),
        ))
    }

    pub(crate) fn evaluate_view(&self, view: &TrainView) -> Metrics {
        Metrics::from_pairs(
            view.labels()
                .iter()
                .enumerate()
                .map(|(i, &l)| (l, self.predict_at(view, i))),
        )
    }
}
