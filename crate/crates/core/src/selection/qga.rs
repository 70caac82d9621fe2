//! Quantum-inspired genetic algorithm: each chromosome is a vector of qubit
//! angles, measured into feature masks and rotated toward the best solution
//! seen so far.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::filter::{filter_merits, FilterMethod};
use super::pso::{from_mask, target_density, to_mask};
use super::{Algorithm, SelectionProblem, SelectionResult};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QgaParams {
    pub population: usize,
    pub iterations: usize,
    /// Rotation step in radians.
    pub delta: f64,
    /// Starting angle; by default the angle whose inclusion probability
    /// yields `k` features on average.
    pub initial_angle: Option<f64>,
}

impl Default for QgaParams {
    fn default() -> Self {
        Self {
            population: 20,
            iterations: 50,
            delta: 0.05 * PI,
            initial_angle: None,
        }
    }
}

/// Probability that a qubit at angle `theta` measures as 1.
pub fn qubit_probability(theta: f64) -> f64 {
    theta.sin().powi(2)
}

/// Angles stay clear of the poles so no bit freezes for good.
const ANGLE_MIN: f64 = 0.01 * PI;
const ANGLE_MAX: f64 = FRAC_PI_2 - 0.01 * PI;

pub(crate) fn measure<R: Rng>(angles: &[f64], rng: &mut R) -> Vec<bool> {
    angles
        .iter()
        .map(|&t| rng.random::<f64>() < qubit_probability(t))
        .collect()
}

pub fn qga_select(
    problem: &SelectionProblem<'_>,
    params: &QgaParams,
    seed: u64,
) -> Result<SelectionResult> {
    let n = problem.universe.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank_merit = filter_merits(FilterMethod::Pcc, problem.fit);
    let theta0 = params
        .initial_angle
        .unwrap_or_else(|| target_density(problem.k, n).sqrt().asin());
    let population = params.population.max(1);
    let mut angles = vec![vec![theta0; n]; population];

    let mut best_fit = f64::NEG_INFINITY;
    let mut best_mask = vec![false; n];
    let mut best_sel = Vec::new();
    let mut trace = Vec::with_capacity(params.iterations + 1);

    for _ in 0..=params.iterations {
        let selections: Vec<_> = angles
            .iter()
            .map(|a| problem.repair(from_mask(&problem.universe, &measure(a, &mut rng)), &rank_merit))
            .collect();
        let fitness = problem.merits(&selections);
        for (s, &f) in selections.iter().zip(&fitness) {
            if f > best_fit {
                best_fit = f;
                best_sel = s.clone();
                best_mask = to_mask(&problem.universe, s);
            }
        }
        trace.push(best_fit);
        for (chromosome, s) in angles.iter_mut().zip(&selections) {
            let x = to_mask(&problem.universe, s);
            for d in 0..n {
                if x[d] != best_mask[d] {
                    let step = if best_mask[d] { params.delta } else { -params.delta };
                    chromosome[d] = (chromosome[d] + step).clamp(ANGLE_MIN, ANGLE_MAX);
                }
            }
        }
    }
    problem.result(Algorithm::Qga, best_sel, trace, seed)
}
