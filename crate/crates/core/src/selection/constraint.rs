//! Feature-availability limits derived from the prediction deadline.
//!
//! A linear predictor consumes one feature per MAC, so a feature arriving in
//! cycle `i` leaves only `⌊(τ − i + 1)/T_MAC⌋` MAC slots before the deadline;
//! `AFL_i` caps how many selected features may arrive that late. A tree
//! spends `T_traverse` cycles per level, so a late feature can only be tested
//! at deep positions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureDescriptor, FeatureId};
use crate::error::{Error, Result};
use crate::sizing::{PredictorKind, TimingParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// For every cycle `c`, features arriving at `c` or later number at most
    /// `AFL_c`.
    #[default]
    Cumulative,
    /// For every cycle `c`, features arriving exactly at `c` number at most
    /// `AFL_c`.
    PerCycle,
}

impl ConstraintMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintMode::Cumulative => "cumulative",
            ConstraintMode::PerCycle => "per_cycle",
        }
    }
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cumulative" | "suffix" | "cumulative-suffix" => Ok(ConstraintMode::Cumulative),
            "per_cycle" | "per-cycle" => Ok(ConstraintMode::PerCycle),
            _ => Err(Error::UnknownName {
                what: "constraint mode",
                name: s.into(),
            }),
        }
    }
}

/// `AFL_i = min(⌊(τ − i + 1)/T_MAC⌋, FL_UB,E)`, zero past the deadline.
pub fn afl_linear_at(cycle: u32, tau_const: u32, t_mac: u32, fl_energy: u32) -> u32 {
    if cycle > tau_const {
        return 0;
    }
    ((tau_const - cycle + 1) / t_mac).min(fl_energy)
}

/// `AFL_i` for cycles `1..=τ` (index `i − 1`).
pub fn compute_afl_linear(timing: &TimingParams, fl_energy: u32) -> Vec<u32> {
    let tau = timing.tau_const();
    (1..=tau)
        .map(|i| afl_linear_at(i, tau, timing.t_mac, fl_energy))
        .collect()
}

/// `⌊(i + T_traverse·D − τ − 1)/T_traverse⌋` before clamping.
pub fn afl_tree_unclamped(cycle: u32, tau_const: u32, t_traverse: u32, depth: u32) -> i64 {
    let num = cycle as i64 + t_traverse as i64 * depth as i64 - tau_const as i64 - 1;
    num.div_euclid(t_traverse as i64)
}

/// Earliest tree position at which a feature arriving in `cycle` may be
/// tested; negative values clamp to the root.
pub fn afl_tree(cycle: u32, timing: &TimingParams, depth: u32) -> u32 {
    let v = afl_tree_unclamped(cycle, timing.tau_const(), timing.t_traverse, depth);
    v.clamp(0, u32::MAX as i64) as u32
}

/// The first cycle whose limit a selection breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub cycle: u32,
    pub count: u32,
    pub limit: u32,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cycle {}: {} features counted, limit {}",
            self.cycle, self.count, self.limit
        )
    }
}

/// Counts `selected` against `afl_linear` (index `i − 1` holds `AFL_i`;
/// cycles past its end have limit 0).
pub fn check_feasible(
    selected: &[FeatureId],
    descriptors: &[FeatureDescriptor],
    afl_linear: &[u32],
    mode: ConstraintMode,
) -> std::result::Result<(), Violation> {
    let cycles: Vec<u32> = selected
        .iter()
        .map(|&f| descriptors[f].availability_cycle)
        .collect();
    check_cycles(&cycles, afl_linear, mode)
}

fn check_cycles(
    cycles: &[u32],
    afl_linear: &[u32],
    mode: ConstraintMode,
) -> std::result::Result<(), Violation> {
    let Some(&last) = cycles.iter().max() else {
        return Ok(());
    };
    let mut hist = vec![0u32; last as usize + 1];
    for &c in cycles {
        hist[c as usize] += 1;
    }
    let limit = |c: u32| afl_linear.get(c as usize - 1).copied().unwrap_or(0);
    match mode {
        ConstraintMode::PerCycle => {
            for c in 1..=last {
                let count = hist[c as usize];
                if count > limit(c) {
                    return Err(Violation {
                        cycle: c,
                        count,
                        limit: limit(c),
                    });
                }
            }
        }
        ConstraintMode::Cumulative => {
            let mut suffix = vec![0u32; last as usize + 2];
            for c in (1..=last as usize).rev() {
                suffix[c] = suffix[c + 1] + hist[c];
            }
            for c in 1..=last {
                let count = suffix[c as usize];
                if count > limit(c) {
                    return Err(Violation {
                        cycle: c,
                        count,
                        limit: limit(c),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Both availability limits for one kernel and timing point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityConstraint {
    pub mode: ConstraintMode,
    pub tau_const: u32,
    /// `AFL_i` for cycles `1..=τ`.
    pub afl_linear: Vec<u32>,
    /// Earliest tree position per feature.
    pub afl_tree: Vec<u32>,
    /// Tree depth the positions were computed for.
    pub depth: u32,
    /// Availability cycle per feature.
    pub availability: Vec<u32>,
}

impl AvailabilityConstraint {
    pub fn new(
        descriptors: &[FeatureDescriptor],
        timing: &TimingParams,
        fl_energy: u32,
        depth: u32,
        mode: ConstraintMode,
    ) -> Self {
        let availability: Vec<u32> = descriptors.iter().map(|d| d.availability_cycle).collect();
        Self {
            mode,
            tau_const: timing.tau_const(),
            afl_linear: compute_afl_linear(timing, fl_energy),
            afl_tree: availability
                .iter()
                .map(|&c| afl_tree(c, timing, depth))
                .collect(),
            depth,
            availability,
        }
    }

    /// No deadline and no energy limit: every feature fits anywhere.
    pub fn unconstrained(descriptors: &[FeatureDescriptor], depth: u32) -> Self {
        let availability: Vec<u32> = descriptors.iter().map(|d| d.availability_cycle).collect();
        let last = availability.iter().copied().max().unwrap_or(1);
        Self {
            mode: ConstraintMode::Cumulative,
            tau_const: last,
            afl_linear: vec![u32::MAX; last as usize],
            afl_tree: vec![0; availability.len()],
            depth,
            availability,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.availability.len()
    }

    pub fn afl_at(&self, cycle: u32) -> u32 {
        if cycle == 0 {
            return 0;
        }
        self.afl_linear.get(cycle as usize - 1).copied().unwrap_or(0)
    }

    pub fn check_linear(&self, selected: &[FeatureId]) -> std::result::Result<(), Violation> {
        let cycles: Vec<u32> = selected.iter().map(|&f| self.availability[f]).collect();
        check_cycles(&cycles, &self.afl_linear, self.mode)
    }

    /// The feature may be tested at some split of a depth-`depth` tree.
    pub fn tree_admissible(&self, f: FeatureId) -> bool {
        self.afl_tree[f] < self.depth
    }

    /// Features usable on their own by a predictor of `kind`.
    pub fn feasible_universe(&self, kind: PredictorKind) -> Vec<FeatureId> {
        (0..self.feature_count())
            .filter(|&f| match kind {
                PredictorKind::Linear => self.afl_at(self.availability[f]) >= 1,
                PredictorKind::Tree => self.tree_admissible(f),
            })
            .collect()
    }

    /// Whether `selected` respects the limits for `kind`, including the
    /// feature-count bound `k`.
    pub fn is_feasible(&self, kind: PredictorKind, selected: &[FeatureId], k: usize) -> bool {
        if selected.len() > k || selected.iter().any(|&f| f >= self.feature_count()) {
            return false;
        }
        match kind {
            PredictorKind::Linear => self.check_linear(selected).is_ok(),
            PredictorKind::Tree => selected.iter().all(|&f| self.tree_admissible(f)),
        }
    }
}
