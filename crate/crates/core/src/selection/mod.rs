//! Scheduling-aware feature selection: availability limits, filter rankings
//! and wrapper searches scored by validation F1.

mod constraint;
mod exhaustive;
mod filter;
mod pso;
mod qga;
mod sequential;

pub use constraint::{
    afl_linear_at, afl_tree, afl_tree_unclamped, check_feasible, compute_afl_linear,
    AvailabilityConstraint, ConstraintMode, Violation,
};
pub use exhaustive::exhaustive_select;
pub use filter::{filter_merits, filter_select, FilterMethod};
pub use pso::{pso_select, PsoParams};
pub use qga::{qga_select, QgaParams};
pub use sequential::{sbe, sfs};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureId;
use crate::error::{Error, Result};
use crate::predictors::{
    DecisionTree, LinearPredictor, LinearThreshold, Predictor, TrainView, TreeParams,
};
use crate::sizing::PredictorKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Variance,
    Pcc,
    Fdr,
    Sfs,
    Sbe,
    Pso,
    Qga,
    Exhaustive,
}

impl Algorithm {
    /// The seven algorithms of a default sweep.
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Variance,
        Algorithm::Pcc,
        Algorithm::Fdr,
        Algorithm::Sfs,
        Algorithm::Sbe,
        Algorithm::Pso,
        Algorithm::Qga,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Variance => "variance",
            Algorithm::Pcc => "pcc",
            Algorithm::Fdr => "fdr",
            Algorithm::Sfs => "sfs",
            Algorithm::Sbe => "sbe",
            Algorithm::Pso => "pso",
            Algorithm::Qga => "qga",
            Algorithm::Exhaustive => "exhaustive",
        }
    }

    pub fn is_filter(self) -> bool {
        self.filter_method().is_some()
    }

    pub fn filter_method(self) -> Option<FilterMethod> {
        match self {
            Algorithm::Variance => Some(FilterMethod::Variance),
            Algorithm::Pcc => Some(FilterMethod::Pcc),
            Algorithm::Fdr => Some(FilterMethod::Fdr),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = Algorithm::ALL.iter().chain([Algorithm::Exhaustive].iter());
        all.copied()
            .find(|a| a.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownName {
                what: "algorithm",
                name: s.into(),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub algorithm: Algorithm,
    pub selected: Vec<FeatureId>,
    /// Per-iteration merit: the committed prefix for sequential methods, the
    /// best-so-far for swarm methods, the ranking scores for filters.
    pub merit_trace: Vec<f64>,
    pub feasible: bool,
    pub seed: u64,
    /// Fewer than `k` features could be selected.
    pub short: bool,
    /// Predictor trainings performed.
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub pso: PsoParams,
    pub qga: QgaParams,
}

/// Everything a selection algorithm needs: the candidate universe, the
/// limits, and the data used to rank or score subsets.
pub struct SelectionProblem<'a> {
    pub kind: PredictorKind,
    /// Target feature count.
    pub k: usize,
    pub constraint: &'a AvailabilityConstraint,
    /// Candidates, ascending; already restricted to the feasible universe.
    pub universe: Vec<FeatureId>,
    /// Full training partition, used by filters.
    pub train: &'a TrainView,
    /// Wrapper fitting split.
    pub fit: &'a TrainView,
    /// Wrapper scoring split.
    pub valid: &'a TrainView,
    pub tree: TreeParams,
    pub linear_threshold: LinearThreshold,
    cache: Mutex<HashMap<Vec<FeatureId>, f64>>,
    evaluations: Mutex<usize>,
}

impl<'a> SelectionProblem<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: PredictorKind,
        k: usize,
        constraint: &'a AvailabilityConstraint,
        candidates: Option<&[FeatureId]>,
        train: &'a TrainView,
        fit: &'a TrainView,
        valid: &'a TrainView,
        linear_threshold: LinearThreshold,
    ) -> Result<Self> {
        let f = constraint.feature_count();
        for view in [train, fit, valid] {
            if view.feature_count() != f {
                return Err(Error::LengthMismatch {
                    expected: f,
                    got: view.feature_count(),
                });
            }
        }
        let mut universe = constraint.feasible_universe(kind);
        if let Some(c) = candidates {
            universe.retain(|f| c.contains(f));
        }
        Ok(Self {
            kind,
            k,
            constraint,
            universe,
            train,
            fit,
            valid,
            tree: TreeParams::new(constraint.depth),
            linear_threshold,
            cache: Mutex::new(HashMap::new()),
            evaluations: Mutex::new(0),
        })
    }

    pub fn is_feasible(&self, subset: &[FeatureId]) -> bool {
        self.constraint.is_feasible(self.kind, subset, self.k)
    }

    /// Trains on the fitting split with `subset` and returns the predictor.
    pub fn train_on_fit(&self, subset: &[FeatureId]) -> Result<Predictor> {
        match self.kind {
            PredictorKind::Linear => Ok(Predictor::Linear(LinearPredictor::fit_view(
                self.fit,
                subset,
                self.linear_threshold,
            )?)),
            PredictorKind::Tree => Ok(Predictor::Tree(DecisionTree::fit_view(
                self.fit,
                subset,
                self.tree,
                &self.constraint.afl_tree,
            )?)),
        }
    }

    /// Validation F1 of a predictor trained on `subset`; 0 for subsets that
    /// cannot produce a predictor.
    pub fn merit(&self, subset: &[FeatureId]) -> f64 {
        let mut key = subset.to_vec();
        key.sort_unstable();
        if let Some(&m) = self.cache.lock().unwrap().get(&key) {
            return m;
        }
        let m = if key.is_empty() {
            0.0
        } else {
            *self.evaluations.lock().unwrap() += 1;
            self.train_on_fit(&key)
                .map(|p| p.evaluate_view(self.valid).f1)
                .unwrap_or(0.0)
        };
        self.cache.lock().unwrap().insert(key, m);
        m
    }

    /// Merits of many subsets, computed in parallel, returned in input order.
    pub fn merits(&self, subsets: &[Vec<FeatureId>]) -> Vec<f64> {
        subsets.par_iter().map(|s| self.merit(s)).collect()
    }

    pub fn evaluations(&self) -> usize {
        *self.evaluations.lock().unwrap()
    }

    /// Drops features from `selected` until it is feasible. Linear
    /// selections lose the latest-arriving feature of the violated cycle
    /// first; trees, whose limit is positional rather than a count, lose the
    /// lowest-ranked feature first. Remaining ties go to the lower
    /// `rank_merit`, then the higher id.
    pub(crate) fn repair(&self, mut selected: Vec<FeatureId>, rank_merit: &[f64]) -> Vec<FeatureId> {
        selected.retain(|f| self.universe.binary_search(f).is_ok());
        selected.sort_unstable();
        selected.dedup();
        let avail = &self.constraint.availability;
        while !self.is_feasible(&selected) {
            let removable = sequential::removal_candidates(self, &selected);
            let victim = match self.kind {
                PredictorKind::Linear => removable.iter().copied().max_by(|&a, &b| {
                    avail[a]
                        .cmp(&avail[b])
                        .then(rank_merit[b].total_cmp(&rank_merit[a]))
                        .then(a.cmp(&b))
                }),
                PredictorKind::Tree => removable.iter().copied().max_by(|&a, &b| {
                    rank_merit[b]
                        .total_cmp(&rank_merit[a])
                        .then(avail[a].cmp(&avail[b]))
                        .then(a.cmp(&b))
                }),
            }
            .expect("an infeasible selection is non-empty");
            selected.retain(|&f| f != victim);
        }
        selected
    }

    fn result(
        &self,
        algorithm: Algorithm,
        mut selected: Vec<FeatureId>,
        merit_trace: Vec<f64>,
        seed: u64,
    ) -> Result<SelectionResult> {
        selected.sort_unstable();
        let feasible = self.is_feasible(&selected)
            && selected.iter().all(|f| self.universe.binary_search(f).is_ok());
        if !feasible {
            return Err(Error::InvalidParameter(format!(
                "{algorithm} produced an infeasible selection {selected:?}"
            )));
        }
        Ok(SelectionResult {
            algorithm,
            short: selected.len() < self.k.min(self.universe.len()),
            selected,
            merit_trace,
            feasible,
            seed,
            evaluations: self.evaluations(),
        })
    }
}

/// Runs `algorithm` on `problem`. Every returned result is feasible.
pub fn select(
    algorithm: Algorithm,
    problem: &SelectionProblem<'_>,
    config: &SelectionConfig,
    seed: u64,
) -> Result<SelectionResult> {
    match algorithm {
        Algorithm::Variance | Algorithm::Pcc | Algorithm::Fdr => {
            filter_select(algorithm.filter_method().unwrap(), problem)
        }
        Algorithm::Sfs => sfs(problem),
        Algorithm::Sbe => sbe(problem),
        Algorithm::Pso => pso_select(problem, &config.pso, seed),
        Algorithm::Qga => qga_select(problem, &config.qga, seed),
        Algorithm::Exhaustive => exhaustive_select(problem),
    }
}
