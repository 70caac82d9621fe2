//! Predictor configuration from prediction-time and energy budgets.
//!
//! A linear predictor is one MAC per feature, so its feature count is bounded
//! by `⌊τ_const / T_MAC⌋` and by `⌊E_predictor / E_MAC⌋`. A decision tree
//! spends one comparison per level, so the same bounds with `T_traverse` and
//! `E_traverse` limit its depth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dfg::{OpKind, ScheduledDfg};
use crate::error::{Error, Result};
use crate::fixed::FixedPointFormat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Linear,
    Tree,
}

impl PredictorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::Linear => "linear",
            PredictorKind::Tree => "tree",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(PredictorKind::Linear),
            "tree" => Ok(PredictorKind::Tree),
            _ => Err(Error::UnknownName {
                what: "predictor",
                name: s.into(),
            }),
        }
    }
}

/// Cycle-level timing. The prediction deadline is `lambda + extra_cycles`,
/// counted from the start of the invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingParams {
    pub lambda: u32,
    pub extra_cycles: u32,
    pub t_mac: u32,
    pub t_traverse: u32,
}

impl TimingParams {
    pub fn new(lambda: u32, extra_cycles: u32, t_mac: u32, t_traverse: u32) -> Result<Self> {
        let t = Self {
            lambda,
            extra_cycles,
            t_mac,
            t_traverse,
        };
        t.validate()?;
        Ok(t)
    }

    /// Timing with the default unit costs: two cycles per MAC, one per level.
    pub fn for_latency(lambda: u32, extra_cycles: u32) -> Self {
        Self {
            lambda,
            extra_cycles,
            t_mac: 2,
            t_traverse: 1,
        }
    }

    pub fn tau_const(&self) -> u32 {
        self.lambda + self.extra_cycles
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_const() < 1 || self.t_mac < 1 || self.t_traverse < 1 {
            return Err(Error::InvalidParameter(format!(
                "timing needs tau_const, T_MAC, T_traverse >= 1: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub e_accelerator: f64,
    pub e_rollback: f64,
    pub e_exact: f64,
    pub e_mac: f64,
    pub e_traverse: f64,
    /// Optional allotment for the predictor; the sizing budget never exceeds
    /// it.
    pub e_predictor_budget: Option<f64>,
    /// Expected energy gain target.
    pub alpha: f64,
    /// Estimated rollback rate.
    pub rollback_rate: f64,
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let energies = [
            self.e_accelerator,
            self.e_rollback,
            self.e_exact,
            self.e_mac,
            self.e_traverse,
        ];
        if energies.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "energies must be finite and non-negative: {self:?}"
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.rollback_rate) {
            return Err(Error::InvalidParameter(format!(
                "rollback rate must be in [0, 1], got {}",
                self.rollback_rate
            )));
        }
        Ok(())
    }
}

/// Largest predictor energy that keeps the system within `alpha` of exact
/// execution: `α·E_exact − E_accelerator − R·E_rollback`.
pub fn predictor_energy_budget(energy: &EnergyParams) -> Result<f64> {
    energy.validate()?;
    let budget = energy.alpha * energy.e_exact
        - energy.e_accelerator
        - energy.rollback_rate * energy.e_rollback;
    if budget <= 0.0 {
        return Err(Error::NoBudget {
            shortfall: -budget,
        });
    }
    Ok(budget)
}

/// The energy budget used for sizing: the system budget, capped by the
/// predictor allotment when one is configured.
pub fn sizing_budget(energy: &EnergyParams) -> Result<f64> {
    let budget = predictor_energy_budget(energy)?;
    Ok(match energy.e_predictor_budget {
        Some(cap) if cap < budget => cap,
        _ => budget,
    })
}

/// `⌊a / b⌋` for non-negative finite `a` and positive `b`, exact with respect
/// to the binary values (the rounded quotient is corrected by an exact
/// remainder check).
pub fn floor_ratio(a: f64, b: f64) -> u64 {
    debug_assert!(a >= 0.0 && b > 0.0);
    let mut q = (a / b).floor();
    if !q.is_finite() || q >= 2f64.powi(52) {
        return if q.is_finite() { q as u64 } else { u64::MAX };
    }
    // The sign of a - q*b is exact under fma.
    while q > 0.0 && (-q).mul_add(b, a) < 0.0 {
        q -= 1.0;
    }
    while (-(q + 1.0)).mul_add(b, a) >= 0.0 {
        q += 1.0;
    }
    q as u64
}

fn saturating_u32(x: u64) -> u32 {
    x.min(u32::MAX as u64) as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearSize {
    pub by_time: u32,
    pub by_energy: u32,
    /// `min(by_time, by_energy)`.
    pub features: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSize {
    pub by_time: u32,
    pub by_energy: u32,
    pub depth: u32,
}

/// Energy bound on linear-predictor features, `⌊budget / E_MAC⌋`.
pub fn linear_energy_bound(budget: f64, e_mac: f64) -> u32 {
    if e_mac <= 0.0 {
        return u32::MAX;
    }
    saturating_u32(floor_ratio(budget, e_mac))
}

pub fn size_linear(timing: &TimingParams, energy: &EnergyParams) -> Result<LinearSize> {
    timing.validate()?;
    let budget = sizing_budget(energy)?;
    let by_time = timing.tau_const() / timing.t_mac;
    let by_energy = linear_energy_bound(budget, energy.e_mac);
    let features = by_time.min(by_energy);
    if features == 0 {
        return Err(Error::LinearInfeasible { by_time, by_energy });
    }
    Ok(LinearSize {
        by_time,
        by_energy,
        features,
    })
}

pub fn size_tree(timing: &TimingParams, energy: &EnergyParams) -> Result<TreeSize> {
    timing.validate()?;
    let budget = sizing_budget(energy)?;
    let by_time = timing.tau_const() / timing.t_traverse;
    let by_energy = if energy.e_traverse <= 0.0 {
        u32::MAX
    } else {
        saturating_u32(floor_ratio(budget, energy.e_traverse))
    };
    let depth = by_time.min(by_energy);
    if depth == 0 {
        return Err(Error::TreeInfeasible { by_time, by_energy });
    }
    Ok(TreeSize {
        by_time,
        by_energy,
        depth,
    })
}

/// A sized predictor: its kind, bound and the parameters that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    /// Feature bound for linear predictors, depth for trees.
    pub bound: u32,
    pub timing: TimingParams,
    pub energy: EnergyParams,
}

impl PredictorConfig {
    pub fn size(kind: PredictorKind, timing: TimingParams, energy: EnergyParams) -> Result<Self> {
        let bound = match kind {
            PredictorKind::Linear => size_linear(&timing, &energy)?.features,
            PredictorKind::Tree => size_tree(&timing, &energy)?.depth,
        };
        Ok(Self {
            kind,
            bound,
            timing,
            energy,
        })
    }
}

/// Abstract per-operation energy costs of the accelerator datapath.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpEnergy {
    /// add, sub, neg.
    pub add: f64,
    /// mul, const-mul.
    pub mul: f64,
    /// Cost factor of an approximable operation when truncation is active.
    pub approx_discount: f64,
    /// Exact re-execution on the host relative to the exact datapath.
    pub exact_overhead: f64,
}

impl Default for OpEnergy {
    fn default() -> Self {
        Self {
            add: 1.0,
            mul: 4.0,
            approx_discount: 0.5,
            exact_overhead: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceleratorEnergy {
    /// One approximate invocation.
    pub approximate: f64,
    /// One exact (host) invocation; also the rollback cost.
    pub exact: f64,
}

impl OpEnergy {
    fn cost(&self, kind: OpKind) -> f64 {
        match kind {
            OpKind::Add | OpKind::Sub | OpKind::Neg => self.add,
            OpKind::Mul | OpKind::ConstMul => self.mul,
            _ => 0.0,
        }
    }

    pub fn accelerator(&self, dfg: &ScheduledDfg, fmt: &FixedPointFormat) -> AcceleratorEnergy {
        let mut exact_ops = 0.0;
        let mut approximate = 0.0;
        for node in dfg.nodes.iter().filter(|n| n.kind.is_arithmetic()) {
            let c = self.cost(node.kind);
            exact_ops += c;
            approximate += if node.approximable && fmt.truncation > 0 {
                c * self.approx_discount
            } else {
                c
            };
        }
        AcceleratorEnergy {
            approximate,
            exact: exact_ops * self.exact_overhead,
        }
    }
}
