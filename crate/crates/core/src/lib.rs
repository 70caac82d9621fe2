//! Error-predictor design for approximate accelerators: scheduled kernel
//! models, feature datasets, budget-driven predictor sizing, predictors,
//! scheduling-aware feature selection, energy accounting and an experiment
//! harness.

pub mod dataset;
pub mod dfg;
pub mod energy;
pub mod error;
pub mod fixed;
pub mod harness;
pub mod kernels;
pub mod predictors;
pub mod selection;
pub mod sizing;

pub use dataset::{Dataset, FeatureDescriptor, FeatureId, FeatureRole, Sample};
pub use dfg::{schedule_asap, Dfg, EvalMode, OpKind, OpLatencies, OpNode, ScheduledDfg};
pub use energy::{energy_report, realized_predictor_energy, EnergyReport, TreeEnergyMode};
pub use error::{Error, Result};
pub use fixed::FixedPointFormat;
pub use harness::{ExperimentConfig, RunReport};
pub use kernels::{build_kernel, KernelName, KernelParams};
pub use predictors::{DecisionTree, LinearPredictor, Metrics, Predictor};
pub use selection::{
    Algorithm, AvailabilityConstraint, ConstraintMode, SelectionConfig, SelectionProblem,
    SelectionResult,
};
pub use sizing::{EnergyParams, PredictorConfig, PredictorKind, TimingParams};
