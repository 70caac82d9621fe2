#![allow(dead_code)]

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schedsel_core::dataset::{FeatureDescriptor, FeatureRole, Sample};
use schedsel_core::Dataset;

pub type Q = Ratio<i128>;

pub fn q(n: i128, d: i128) -> Q {
    Ratio::new(n, d)
}

pub fn floor_q(x: Q) -> i128 {
    x.floor().to_integer()
}

/// ⌊τ / T_MAC⌋
pub fn time_bound(tau: u32, t: u32) -> i128 {
    floor_q(q(tau as i128, t as i128))
}

/// ⌊budget / E⌋ for exact rationals.
pub fn energy_bound(budget: Q, e: Q) -> i128 {
    floor_q(budget / e)
}

/// Per-cycle linear limit, zero past the deadline.
pub fn afl_linear(i: u32, tau: u32, t_mac: u32, fl_e: u32) -> i128 {
    if i > tau {
        return 0;
    }
    floor_q(q(tau as i128 - i as i128 + 1, t_mac as i128)).min(fl_e as i128)
}

/// Earliest tree level for a feature arriving in cycle `i`, before clamping.
pub fn afl_tree(i: u32, tau: u32, t: u32, depth: u32) -> i128 {
    floor_q(q(
        i as i128 + t as i128 * depth as i128 - tau as i128 - 1,
        t as i128,
    ))
}

/// F1 as the harmonic mean of rational precision and recall, rounded once.
pub fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = q(tp as i128, (tp + fp) as i128);
    let r = q(tp as i128, (tp + fn_) as i128);
    let h = q(2, 1) * p * r / (p + r);
    *h.numer() as f64 / *h.denom() as f64
}

pub fn descriptors(availability: &[u32]) -> Vec<FeatureDescriptor> {
    availability
        .iter()
        .enumerate()
        .map(|(i, &c)| FeatureDescriptor {
            feature_id: i,
            node_id: i,
            availability_cycle: c,
            role: if c == 1 {
                FeatureRole::Input
            } else {
                FeatureRole::Intermediate
            },
        })
        .collect()
}

/// Uniform features in [-1, 1]; the error is `error(features, rng)` and the
/// label marks errors above `threshold`.
pub fn synthetic(
    availability: &[u32],
    n: usize,
    seed: u64,
    threshold: f64,
    error: impl Fn(&[f64], &mut ChaCha8Rng) -> f64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let features: Vec<f64> = availability
                .iter()
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            let e = error(&features, &mut rng);
            Sample {
                features,
                error: e,
                label: false,
            }
        })
        .collect();
    let mut d = Dataset {
        descriptors: descriptors(availability),
        samples,
        labeling: None,
    };
    d.apply_threshold(threshold, 0.1);
    d
}
