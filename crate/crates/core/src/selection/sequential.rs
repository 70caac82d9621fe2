//! Greedy wrappers: forward selection and backward elimination.

use super::{Algorithm, ConstraintMode, SelectionProblem, SelectionResult};
use crate::dataset::FeatureId;
use crate::error::Result;
use crate::sizing::PredictorKind;

/// Index of the first maximum.
fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Sequential forward selection. Each step tries every remaining candidate
/// whose addition keeps the selection feasible and commits the one with the
/// best validation F1; the search stops at `k` features or when nothing
/// feasible remains.
pub fn sfs(problem: &SelectionProblem<'_>) -> Result<SelectionResult> {
    let mut selected: Vec<FeatureId> = Vec::new();
    let mut trace = Vec::new();
    while selected.len() < problem.k {
        let candidates: Vec<Vec<FeatureId>> = problem
            .universe
            .iter()
            .filter(|f| !selected.contains(f))
            .map(|&f| {
                let mut s = selected.clone();
                s.push(f);
                s
            })
            .filter(|s| problem.is_feasible(s))
            .collect();
        let merits = problem.merits(&candidates);
        let Some(best) = argmax(&merits) else {
            break;
        };
        selected = candidates[best].clone();
        trace.push(merits[best]);
    }
    problem.result(Algorithm::Sfs, selected, trace, 0)
}

/// Features whose removal relieves the first violated cycle limit, or every
/// selected feature when only the size bound is exceeded.
pub(crate) fn removal_candidates(problem: &SelectionProblem<'_>, selected: &[FeatureId]) -> Vec<FeatureId> {
    if problem.kind == PredictorKind::Linear {
        if let Err(v) = problem.constraint.check_linear(selected) {
            let avail = &problem.constraint.availability;
            return selected
                .iter()
                .copied()
                .filter(|&f| match problem.constraint.mode {
                    ConstraintMode::Cumulative => avail[f] >= v.cycle,
                    ConstraintMode::PerCycle => avail[f] == v.cycle,
                })
                .collect();
        }
    }
    selected.to_vec()
}

/// Sequential backward elimination from the whole universe. Each step drops
/// the feature whose removal gives the best validation F1, choosing among
/// the features of a violated cycle while the selection is infeasible.
pub fn sbe(problem: &SelectionProblem<'_>) -> Result<SelectionResult> {
    let mut selected = problem.universe.clone();
    let mut trace = vec![problem.merit(&selected)];
    while !problem.is_feasible(&selected) && !selected.is_empty() {
        let removable = removal_candidates(problem, &selected);
        let subsets: Vec<Vec<FeatureId>> = removable
            .iter()
            .map(|r| selected.iter().copied().filter(|f| f != r).collect())
            .collect();
        let merits = problem.merits(&subsets);
        let best = argmax(&merits).expect("an infeasible selection is non-empty");
        selected = subsets[best].clone();
        trace.push(merits[best]);
    }
    problem.result(Algorithm::Sbe, selected, trace, 0)
}
