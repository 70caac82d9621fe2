//! Filter methods: rank features by a per-feature statistic, then walk the
//! ranking and keep each feature that leaves the selection feasible.

use serde::{Deserialize, Serialize};

use super::{Algorithm, SelectionProblem, SelectionResult};
use crate::dataset::FeatureId;
use crate::error::Result;
use crate::predictors::TrainView;
use crate::sizing::PredictorKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMethod {
    /// Feature variance.
    Variance,
    /// |Pearson correlation| with the continuous error.
    Pcc,
    /// Fisher discriminant ratio between the two label classes.
    Fdr,
}

impl FilterMethod {
    pub fn algorithm(self) -> Algorithm {
        match self {
            FilterMethod::Variance => Algorithm::Variance,
            FilterMethod::Pcc => Algorithm::Pcc,
            FilterMethod::Fdr => Algorithm::Fdr,
        }
    }
}

fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, var, n)
}

fn pcc(x: &[f64], y: &[f64]) -> f64 {
    let (mx, vx, n) = mean_var(x.iter().copied());
    let (my, vy, _) = mean_var(y.iter().copied());
    if n == 0 || vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    let cov = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n as f64;
    (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0)
}

fn fdr(x: &[f64], labels: &[bool]) -> f64 {
    let pos = x.iter().zip(labels).filter(|(_, &l)| l).map(|(v, _)| *v);
    let neg = x.iter().zip(labels).filter(|(_, &l)| !l).map(|(v, _)| *v);
    let (m1, v1, n1) = mean_var(pos);
    let (m0, v0, n0) = mean_var(neg);
    if n1 == 0 || n0 == 0 {
        return 0.0;
    }
    let num = (m1 - m0) * (m1 - m0);
    let den = v1 + v0;
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::MAX
    } else {
        0.0
    }
}

/// The ranking statistic for every feature of `view`.
pub fn filter_merits(method: FilterMethod, view: &TrainView) -> Vec<f64> {
    (0..view.feature_count())
        .map(|f| {
            let col = view.column(f);
            let m = match method {
                FilterMethod::Variance => mean_var(col.iter().copied()).1,
                FilterMethod::Pcc => pcc(col, view.errors()).abs(),
                FilterMethod::Fdr => fdr(col, view.labels()),
            };
            if m.is_nan() {
                0.0
            } else {
                m
            }
        })
        .collect()
}

/// Orders `features` by descending merit, lowest id first among ties.
pub(crate) fn rank(features: &[FeatureId], merits: &[f64]) -> Vec<FeatureId> {
    let mut order = features.to_vec();
    order.sort_by(|&a, &b| merits[b].total_cmp(&merits[a]).then(a.cmp(&b)));
    order
}

pub fn filter_select(method: FilterMethod, problem: &SelectionProblem<'_>) -> Result<SelectionResult> {
    let merits = filter_merits(method, problem.train);
    let mut selected: Vec<FeatureId> = Vec::new();
    let mut trace = Vec::new();
    for f in rank(&problem.universe, &merits) {
        if selected.len() >= problem.k {
            break;
        }
        selected.push(f);
        let keep = match problem.kind {
            PredictorKind::Linear => problem.is_feasible(&selected),
            PredictorKind::Tree => true,
        };
        if keep {
            trace.push(merits[f]);
        } else {
            selected.pop();
        }
    }
    if selected.len() < problem.k.min(problem.universe.len()) {
        log::warn!(
            "{} filter found only {} of {} feasible features",
            method.algorithm(),
            selected.len(),
            problem.k
        );
    }
    problem.result(method.algorithm(), selected, trace, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcc_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pcc(&x, &x) - 1.0).abs() < 1e-12);
        let y = [4.0, 3.0, 2.0, 1.0];
        assert!((pcc(&x, &y) + 1.0).abs() < 1e-12);
        assert_eq!(pcc(&x, &[1.0; 4]), 0.0);
    }

    #[test]
    fn fdr_closed_form() {
        let x = [0.0, 2.0, 10.0, 14.0];
        let l = [false, false, true, true];
        // Means 1 and 12, variances 1 and 4.
        assert!((fdr(&x, &l) - 121.0 / 5.0).abs() < 1e-12);
        assert_eq!(fdr(&x, &[true; 4]), 0.0);
    }

    #[test]
    fn rank_breaks_ties_by_id() {
        assert_eq!(rank(&[0, 1, 2, 3], &[0.5, 0.9, 0.5, 0.1]), vec![1, 0, 2, 3]);
    }
}
