//! System energy per invocation: approximate accelerator, issued rollbacks
//! and the predictor itself, normalized to all-exact execution.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::predictors::{Metrics, Predictor};
use crate::sizing::EnergyParams;

/// How tree energy is charged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeEnergyMode {
    /// Mean number of levels traversed on the evaluation data.
    #[default]
    Average,
    /// The depth bound, as used for sizing.
    WorstCase,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub issued_rollback_rate: f64,
    pub predictor_energy: f64,
    pub normalized_energy: f64,
    pub alpha_target: f64,
    pub exceeds_alpha: bool,
    pub exceeds_exact: bool,
}

/// Energy of one prediction: one MAC per linear feature, or one comparison
/// per tree level visited.
pub fn realized_predictor_energy(
    predictor: &Predictor,
    data: &Dataset,
    params: &EnergyParams,
    mode: TreeEnergyMode,
) -> f64 {
    match predictor {
        Predictor::Linear(p) => p.selected_features.len() as f64 * params.e_mac,
        Predictor::Tree(t) => {
            let levels = match mode {
                TreeEnergyMode::WorstCase => t.max_depth as f64,
                TreeEnergyMode::Average if data.is_empty() => 0.0,
                TreeEnergyMode::Average => {
                    data.samples
                        .iter()
                        .map(|s| t.traversal_depth(&s.features) as f64)
                        .sum::<f64>()
                        / data.len() as f64
                }
            };
            levels * params.e_traverse
        }
    }
}

pub fn energy_report(metrics: &Metrics, params: &EnergyParams, predictor_energy: f64) -> EnergyReport {
    let total = metrics.total();
    let issued_rollback_rate = if total == 0 {
        0.0
    } else {
        metrics.predicted_positive() as f64 / total as f64
    };
    let normalized_energy = (params.e_accelerator
        + issued_rollback_rate * params.e_rollback
        + predictor_energy)
        / params.e_exact;
    EnergyReport {
        issued_rollback_rate,
        predictor_energy,
        normalized_energy,
        alpha_target: params.alpha,
        exceeds_alpha: normalized_energy > params.alpha,
        exceeds_exact: normalized_energy >= 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EnergyParams {
        EnergyParams {
            e_accelerator: 30.0,
            e_rollback: 100.0,
            e_exact: 100.0,
            e_mac: 2.0,
            e_traverse: 1.0,
            e_predictor_budget: None,
            alpha: 0.7,
            rollback_rate: 0.1,
        }
    }

    #[test]
    fn worked_examples() {
        // 12 of 100 invocations flagged.
        let m = Metrics::from_counts(10, 2, 86, 2);
        let r = energy_report(&m, &params(), 20.0);
        assert!((r.issued_rollback_rate - 0.12).abs() < 1e-15);
        assert!((r.normalized_energy - 0.62).abs() < 1e-12);
        assert!(!r.exceeds_alpha);

        let perfect = Metrics::from_counts(10, 0, 90, 0);
        let r = energy_report(&perfect, &params(), 20.0);
        assert!((r.normalized_energy - 0.6).abs() < 1e-12);

        let all = Metrics::from_counts(10, 90, 0, 0);
        let r = energy_report(&all, &params(), 20.0);
        assert!(r.normalized_energy > 1.0);
        assert!(r.exceeds_exact);
    }

    #[test]
    fn linear_energy_is_mac_count() {
        let p = Predictor::Linear(crate::predictors::LinearPredictor {
            selected_features: vec![0, 1, 2, 3],
            weights: vec![0.0; 4],
            bias: 0.0,
            decision_threshold: 0.0,
            rank_deficient: false,
        });
        let data = Dataset {
            descriptors: vec![],
            samples: vec![],
            labeling: None,
        };
        assert_eq!(realized_predictor_energy(&p, &data, &params(), TreeEnergyMode::Average), 8.0);
    }
}
