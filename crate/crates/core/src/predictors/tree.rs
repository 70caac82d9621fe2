//! Depth-bounded Gini decision tree whose splits respect feature arrival
//! times: a split at position `p` (root is 0) may only test a feature whose
//! `afl` entry is at most `p`.

use serde::{Deserialize, Serialize};

use super::view::TrainView;
use crate::dataset::{Dataset, FeatureId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: u32,
    pub min_samples_leaf: usize,
}

impl TreeParams {
    pub fn new(max_depth: u32) -> Self {
        Self {
            max_depth,
            min_samples_leaf: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: FeatureId,
        threshold: f64,
        position: u32,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        label: bool,
        samples: usize,
        positives: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub max_depth: u32,
    pub min_samples_leaf: usize,
    pub root: TreeNode,
}

/// A split that breaks the positional or depth rule.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeViolation {
    pub feature: FeatureId,
    pub position: u32,
    pub afl: Option<u32>,
}

/// Gini impurity times node size, `n·(1 − p² − q²)`, in a form that is exact
/// for integer counts up to 2²⁶.
fn weighted_gini(n: usize, pos: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (n, pos) = (n as f64, pos as f64);
    2.0 * pos * (n - pos) / n
}

struct Builder<'a> {
    view: &'a TrainView,
    params: TreeParams,
    afl: &'a [u32],
    goes_left: Vec<bool>,
}

struct BestSplit {
    impurity: f64,
    slot: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn leaf(&self, members: &[u32]) -> TreeNode {
        let labels = self.view.labels();
        let positives = members.iter().filter(|&&i| labels[i as usize]).count();
        TreeNode::Leaf {
            // Ties go to the negative class.
            label: 2 * positives > members.len(),
            samples: members.len(),
            positives,
        }
    }

    fn grow(&mut self, features: &[FeatureId], lists: Vec<Vec<u32>>, position: u32) -> TreeNode {
        let members = &lists[0];
        let n = members.len();
        let labels = self.view.labels();
        let positives = members.iter().filter(|&&i| labels[i as usize]).count();
        let min_leaf = self.params.min_samples_leaf.max(1);
        if position >= self.params.max_depth || positives == 0 || positives == n || n < 2 * min_leaf
        {
            return self.leaf(members);
        }
        let parent = weighted_gini(n, positives);
        let mut best: Option<BestSplit> = None;
        for (slot, (&f, list)) in features.iter().zip(&lists).enumerate() {
            if self.afl[f] > position {
                continue;
            }
            let col = self.view.column(f);
            let (mut left_n, mut left_pos) = (0usize, 0usize);
            for w in list.windows(2) {
                let i = w[0] as usize;
                left_n += 1;
                left_pos += labels[i] as usize;
                if left_n < min_leaf {
                    continue;
                }
                if n - left_n < min_leaf {
                    break;
                }
                let (v, next) = (col[i], col[w[1] as usize]);
                if v == next {
                    continue;
                }
                let impurity = weighted_gini(left_n, left_pos)
                    + weighted_gini(n - left_n, positives - left_pos);
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit {
                        impurity,
                        slot,
                        // Midpoint, kept strictly below `next` after rounding.
                        threshold: {
                            let mid = v + (next - v) / 2.0;
                            if mid < next { mid } else { v }
                        },
                    });
                }
            }
        }
        let Some(best) = best.filter(|b| b.impurity < parent) else {
            return self.leaf(members);
        };
        let feature = features[best.slot];
        let col = self.view.column(feature);
        for &i in members {
            self.goes_left[i as usize] = col[i as usize] <= best.threshold;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in &lists {
            let (l, r): (Vec<u32>, Vec<u32>) =
                list.iter().partition(|&&i| self.goes_left[i as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        drop(lists);
        let left = self.grow(features, left_lists, position + 1);
        let right = self.grow(features, right_lists, position + 1);
        TreeNode::Split {
            feature,
            threshold: best.threshold,
            position,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

impl DecisionTree {
    /// Trains on `train` using only `candidates`; `afl[f]` is the earliest
    /// position at which feature `f` may be tested.
    pub fn fit(
        train: &Dataset,
        candidates: &[FeatureId],
        params: TreeParams,
        afl: &[u32],
    ) -> Result<Self> {
        Self::fit_view(&TrainView::new(train)?, candidates, params, afl)
    }

    pub fn fit_view(
        view: &TrainView,
        candidates: &[FeatureId],
        params: TreeParams,
        afl: &[u32],
    ) -> Result<Self> {
        view.check_features(candidates)?;
        if afl.len() < view.feature_count() {
            return Err(Error::LengthMismatch {
                expected: view.feature_count(),
                got: afl.len(),
            });
        }
        if params.max_depth > 0 && !candidates.iter().any(|&f| afl[f] == 0) {
            return Err(Error::NoRootFeature);
        }
        let mut features = candidates.to_vec();
        features.sort_unstable();
        features.dedup();
        let sorted = view.presorted();
        let mut lists: Vec<Vec<u32>> = features.iter().map(|&f| sorted[f].clone()).collect();
        if lists.is_empty() {
            lists.push((0..view.len() as u32).collect());
        }
        let mut builder = Builder {
            view,
            params,
            afl,
            goes_left: vec![false; view.len()],
        };
        let root = builder.grow(&features, lists, 0);
        Ok(Self {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            root,
        })
    }

    fn leaf_for(&self, value: impl Fn(FeatureId) -> f64) -> (&TreeNode, u32) {
        let mut node = &self.root;
        let mut depth = 0;
        while let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = node
        {
            node = if value(*feature) <= *threshold { left } else { right };
            depth += 1;
        }
        (node, depth)
    }

    pub fn predict(&self, features: &[f64]) -> bool {
        matches!(self.leaf_for(|f| features[f]).0, TreeNode::Leaf { label: true, .. })
    }

    pub(crate) fn predict_at(&self, view: &TrainView, i: usize) -> bool {
        matches!(
            self.leaf_for(|f| view.column(f)[i]).0,
            TreeNode::Leaf { label: true, .. }
        )
    }

    /// Number of comparisons made for this input.
    pub fn traversal_depth(&self, features: &[f64]) -> u32 {
        self.leaf_for(|f| features[f]).1
    }

    pub fn depth(&self) -> u32 {
        fn walk(n: &TreeNode) -> u32 {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }

    pub fn split_count(&self) -> usize {
        self.splits().len()
    }

    /// `(feature, position)` for every split, pre-order.
    pub fn splits(&self) -> Vec<(FeatureId, u32)> {
        fn walk(n: &TreeNode, out: &mut Vec<(FeatureId, u32)>) {
            if let TreeNode::Split {
                feature,
                position,
                left,
                right,
                ..
            } = n
            {
                out.push((*feature, *position));
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Distinct features used by any split, ascending.
    pub fn used_features(&self) -> Vec<FeatureId> {
        let mut f: Vec<FeatureId> = self.splits().into_iter().map(|(f, _)| f).collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Verifies every split against the positional rule and the depth bound.
/// Positions are recomputed from the tree shape rather than trusted from the
/// stored field.
pub fn check_tree_constraints(
    tree: &DecisionTree,
    afl: &[u32],
    max_depth: u32,
) -> std::result::Result<(), TreeViolation> {
    fn walk(
        n: &TreeNode,
        level: u32,
        afl: &[u32],
        max_depth: u32,
    ) -> std::result::Result<(), TreeViolation> {
        if let TreeNode::Split {
            feature,
            position,
            left,
            right,
            ..
        } = n
        {
            let a = afl.get(*feature).copied();
            let ok = *position == level && level < max_depth && a.is_some_and(|a| a <= level);
            if !ok {
                return Err(TreeViolation {
                    feature: *feature,
                    position: level,
                    afl: a,
                });
            }
            walk(left, level + 1, afl, max_depth)?;
            walk(right, level + 1, afl, max_depth)?;
        }
        Ok(())
    }
    walk(&tree.root, 0, afl, max_depth)
}
