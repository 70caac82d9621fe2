//! Binary particle swarm over feature-inclusion masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::filter::{filter_merits, FilterMethod};
use super::{Algorithm, SelectionProblem, SelectionResult};
use crate::dataset::FeatureId;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub swarm: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity clamp.
    pub v_max: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            swarm: 20,
            iterations: 50,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            v_max: 4.0,
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Inclusion probability that yields `k` features on average.
pub(crate) fn target_density(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (k as f64 / n as f64).clamp(0.01, 0.5)
}

pub(crate) fn to_mask(universe: &[FeatureId], selected: &[FeatureId]) -> Vec<bool> {
    universe.iter().map(|f| selected.contains(f)).collect()
}

pub(crate) fn from_mask(universe: &[FeatureId], mask: &[bool]) -> Vec<FeatureId> {
    universe
        .iter()
        .zip(mask)
        .filter(|(_, &b)| b)
        .map(|(&f, _)| f)
        .collect()
}

/// Swarm search. Sampled positions are repaired to feasibility before
/// scoring, and the repaired mask becomes the particle's position. The
/// merit trace holds the global best after each iteration.
pub fn pso_select(
    problem: &SelectionProblem<'_>,
    params: &PsoParams,
    seed: u64,
) -> Result<SelectionResult> {
    let n = problem.universe.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank_merit = filter_merits(FilterMethod::Pcc, problem.fit);
    let p0 = target_density(problem.k, n);
    let v0 = (p0 / (1.0 - p0)).ln();

    let swarm = params.swarm.max(1);
    let mut velocity = vec![vec![v0; n]; swarm];
    let mut position: Vec<Vec<bool>> = (0..swarm)
        .map(|_| (0..n).map(|_| rng.random::<f64>() < p0).collect())
        .collect();
    let mut selections = vec![Vec::new(); swarm];
    let evaluate = |position: &mut Vec<Vec<bool>>, selections: &mut Vec<Vec<FeatureId>>| {
        for (x, s) in position.iter_mut().zip(selections.iter_mut()) {
            *s = problem.repair(from_mask(&problem.universe, x), &rank_merit);
            *x = to_mask(&problem.universe, s);
        }
        problem.merits(selections)
    };

    let fitness = evaluate(&mut position, &mut selections);
    let mut pbest = position.clone();
    let mut pbest_fit = fitness.clone();
    let mut g = 0;
    for i in 1..swarm {
        if fitness[i] > fitness[g] {
            g = i;
        }
    }
    let mut gbest = position[g].clone();
    let mut gbest_fit = fitness[g];
    let mut gbest_sel = selections[g].clone();
    let mut trace = vec![gbest_fit];

    for _ in 0..params.iterations {
        for i in 0..swarm {
            for d in 0..n {
                let x = position[i][d] as u8 as f64;
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = params.inertia * velocity[i][d]
                    + params.cognitive * r1 * (pbest[i][d] as u8 as f64 - x)
                    + params.social * r2 * (gbest[d] as u8 as f64 - x);
                velocity[i][d] = v.clamp(-params.v_max, params.v_max);
                position[i][d] = rng.random::<f64>() < sigmoid(velocity[i][d]);
            }
        }
        let fitness = evaluate(&mut position, &mut selections);
        for i in 0..swarm {
            if fitness[i] > pbest_fit[i] {
                pbest_fit[i] = fitness[i];
                pbest[i] = position[i].clone();
            }
            if fitness[i] > gbest_fit {
                gbest_fit = fitness[i];
                gbest = position[i].clone();
                gbest_sel = selections[i].clone();
            }
        }
        trace.push(gbest_fit);
    }
    problem.result(Algorithm::Pso, gbest_sel, trace, seed)
}
