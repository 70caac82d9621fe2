//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::TreeEnergyMode;
use crate::error::{Error, Result};
use crate::fixed::FixedPointFormat;
use crate::kernels::{KernelName, KernelParams};
use crate::predictors::LinearThreshold;
use crate::selection::{Algorithm, ConstraintMode, SelectionConfig};
use crate::sizing::{OpEnergy, PredictorKind};

/// Predictor unit costs and allotment for one kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEnergy {
    pub e_mac: f64,
    pub e_traverse: f64,
    /// Cap on the predictor energy budget.
    pub e_predictor_budget: Option<f64>,
}

impl KernelEnergy {
    /// Defaults chosen so each benchmark lands on its reference feature count
    /// and tree depth.
    pub fn default_for(kernel: KernelName) -> Self {
        let (e_mac, e_traverse, cap) = match kernel {
            KernelName::Sobel => (4.0, 4.0, 16.0),
            KernelName::Fir6 => (3.0, 3.0, 18.0),
            KernelName::Forwardk2j => (3.0, 3.0, 12.0),
            KernelName::Dct8 => (1.9, 3.0, 21.0),
            KernelName::Fft8 => (2.0, 4.0, 28.0),
            KernelName::Fir4 => (3.0, 3.0, 12.0),
        };
        Self {
            e_mac,
            e_traverse,
            e_predictor_budget: Some(cap),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub alpha: f64,
    pub ops: OpEnergy,
    /// Per-kernel overrides of the unit costs, keyed by kernel name.
    pub kernels: BTreeMap<KernelName, KernelEnergy>,
    pub tree_energy: TreeEnergyMode,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            ops: OpEnergy::default(),
            kernels: BTreeMap::new(),
            tree_energy: TreeEnergyMode::Average,
        }
    }
}

impl EnergyConfig {
    pub fn kernel(&self, kernel: KernelName) -> KernelEnergy {
        self.kernels
            .get(&kernel)
            .copied()
            .unwrap_or_else(|| KernelEnergy::default_for(kernel))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub t_mac: u32,
    pub t_traverse: u32,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            t_mac: 1,
            t_traverse: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kernel: KernelName,
    pub ratio: f64,
    /// Seeds tried for the stochastic searches.
    pub seeds: u64,
    /// Allowed F1 gap to the exhaustive optimum.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kernel: KernelName::Fir4,
            ratio: 0.1,
            seeds: 5,
            tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernels: Vec<KernelName>,
    pub kernel_params: KernelParams,
    pub format: FixedPointFormat,
    /// Invocations simulated per kernel, before the train/test split.
    pub samples: usize,
    pub seed: u64,
    pub train_fraction: f64,
    /// Share of the training partition used to fit wrapper candidates; the
    /// rest scores them.
    pub fit_fraction: f64,
    pub rollback_ratios: Vec<f64>,
    pub predictors: Vec<PredictorKind>,
    pub algorithms: Vec<Algorithm>,
    /// Extra prediction cycles for `run`.
    pub run_extra_cycles: u32,
    /// Extra prediction cycles swept by `sweep-cycles`.
    pub extra_cycles: Vec<u32>,
    pub constraint_mode: ConstraintMode,
    /// Also run every cell on the accelerator inputs alone.
    pub inputs_only_baseline: bool,
    pub timing: TimingConfig,
    pub energy: EnergyConfig,
    pub selection: SelectionConfig,
    pub linear_threshold: LinearThreshold,
    pub min_samples_leaf: usize,
    /// Features handed to tree training; the depth bound when absent.
    pub tree_feature_target: Option<usize>,
    /// Write wall-clock selection times into `results.csv` (makes the file
    /// run-dependent).
    pub record_runtime: bool,
    pub oracle: OracleConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kernels: KernelName::BENCHMARKS.to_vec(),
            kernel_params: KernelParams::default(),
            format: FixedPointFormat::default(),
            samples: 5000,
            seed: 2024,
            train_fraction: 0.5,
            fit_fraction: 0.7,
            rollback_ratios: vec![0.05, 0.10, 0.15, 0.20],
            predictors: vec![PredictorKind::Linear, PredictorKind::Tree],
            algorithms: Algorithm::ALL.to_vec(),
            run_extra_cycles: 0,
            extra_cycles: vec![0, 1, 2, 4],
            constraint_mode: ConstraintMode::Cumulative,
            inputs_only_baseline: true,
            timing: TimingConfig::default(),
            energy: EnergyConfig::default(),
            selection: SelectionConfig::default(),
            linear_threshold: LinearThreshold::Label,
            min_samples_leaf: 5,
            tree_feature_target: None,
            record_runtime: false,
            oracle: OracleConfig::default(),
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.format.validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.kernels.is_empty() || self.predictors.is_empty() || self.algorithms.is_empty() {
            return bad("kernels, predictors and algorithms must be non-empty".into());
        }
        if self.rollback_ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return bad(format!("rollback ratios must be in (0, 1): {:?}", self.rollback_ratios));
        }
        for f in [self.train_fraction, self.fit_fraction] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("split fractions must be in (0, 1), got {f}"));
            }
        }
        if self.timing.t_mac == 0 || self.timing.t_traverse == 0 {
            return bad("T_MAC and T_traverse must be at least 1".into());
        }
        if !(self.energy.alpha > 0.0 && self.energy.alpha <= 1.0) {
            return bad(format!("alpha must be in (0, 1], got {}", self.energy.alpha));
        }
        if self.extra_cycles.is_empty() {
            return bad("extra_cycles must be non-empty".into());
        }
        Ok(())
    }

    /// Hex digest of the canonical TOML form; identifies the configuration
    /// in every emitted row.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Deterministic sub-seed for a labelled stage of the experiment.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
