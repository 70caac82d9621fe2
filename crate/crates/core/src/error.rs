use thiserror::Error;

use crate::dfg::NodeId;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("kernel `{kernel}` expects {expected} coefficients, got {got}")]
    CoefficientArity {
        kernel: String,
        expected: usize,
        got: usize,
    },

    #[error("cycle detected in dataflow graph (node {0} is on a cycle)")]
    Cycle(NodeId),

    #[error("malformed dataflow graph: {0}")]
    MalformedGraph(String),

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("cannot calibrate a threshold from an empty error list")]
    EmptyErrors,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no predictor affordable: energy budget is short by {shortfall} units")]
    NoBudget { shortfall: f64 },

    #[error("linear predictor infeasible (timing bound {by_time}, energy bound {by_energy})")]
    LinearInfeasible { by_time: u32, by_energy: u32 },

    #[error("tree infeasible (timing bound {by_time}, energy bound {by_energy})")]
    TreeInfeasible { by_time: u32, by_energy: u32 },

    #[error("constraints exclude all features at root")]
    NoRootFeature,

    #[error("unknown feature id {0}")]
    UnknownFeature(usize),

    #[error("dataset is not labeled")]
    Unlabeled,

    #[error("unknown {what} `{name}`")]
    UnknownName { what: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
