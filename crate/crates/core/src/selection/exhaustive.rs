//! Exhaustive subset search, usable only on small universes as a reference
//! for the heuristic methods.

use super::{Algorithm, SelectionProblem, SelectionResult};
use crate::dataset::FeatureId;
use crate::error::{Error, Result};

/// Largest universe the exhaustive search accepts.
pub const EXHAUSTIVE_MAX_FEATURES: usize = 20;

/// Scores every feasible subset of size `1..=k`. The merit trace holds the
/// best merit found at each subset size.
pub fn exhaustive_select(problem: &SelectionProblem<'_>) -> Result<SelectionResult> {
    let n = problem.universe.len();
    if n > EXHAUSTIVE_MAX_FEATURES {
        return Err(Error::InvalidParameter(format!(
            "exhaustive search over {n} features exceeds the limit of {EXHAUSTIVE_MAX_FEATURES}"
        )));
    }
    let k = problem.k.min(n);
    let mut by_size: Vec<Vec<Vec<FeatureId>>> = vec![Vec::new(); k + 1];
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size > k {
            continue;
        }
        let subset: Vec<FeatureId> = (0..n)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| problem.universe[b])
            .collect();
        if problem.is_feasible(&subset) {
            by_size[size].push(subset);
        }
    }
    let mut best: Option<(f64, Vec<FeatureId>)> = None;
    let mut trace = Vec::new();
    for subsets in by_size.iter().skip(1) {
        let merits = problem.merits(subsets);
        let mut size_best = 0.0f64;
        for (s, &m) in subsets.iter().zip(&merits) {
            size_best = size_best.max(m);
            if best.as_ref().is_none_or(|(b, _)| m > *b) {
                best = Some((m, s.clone()));
            }
        }
        trace.push(size_best);
    }
    let selected = best.map(|(_, s)| s).unwrap_or_default();
    problem.result(Algorithm::Exhaustive, selected, trace, 0)
}
