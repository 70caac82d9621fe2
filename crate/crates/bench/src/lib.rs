//! Benchmark fixtures.

use schedsel_core::harness::{
    prepare_kernel, prepare_ratio, setup_cell, CellSetup, ExperimentConfig, KernelData, RatioData,
};
use schedsel_core::{KernelName, PredictorKind, SelectionProblem};

/// One prepared grid cell: dataset, calibrated partitions and sizing.
pub struct Fixture {
    pub config: ExperimentConfig,
    pub kernel: KernelData,
    pub ratio: RatioData,
    pub setup: CellSetup,
    pub kind: PredictorKind,
}

impl Fixture {
    pub fn new(kernel: KernelName, kind: PredictorKind, samples: usize) -> Self {
        let config = ExperimentConfig {
            samples,
            ..Default::default()
        };
        let kd = prepare_kernel(&config, kernel).expect("kernel builds");
        let rd = prepare_ratio(&config, &kd, 0.1).expect("labels calibrate");
        let setup = setup_cell(&config, &kd, 0.1, kind, 0).expect("sizing is feasible");
        Self {
            config,
            kernel: kd,
            ratio: rd,
            setup,
            kind,
        }
    }

    /// A fresh problem, so no merit cache survives between iterations.
    pub fn problem(&self) -> SelectionProblem<'_> {
        SelectionProblem::new(
            self.kind,
            self.setup.k,
            &self.setup.constraint,
            None,
            &self.ratio.train_view,
            &self.ratio.fit_view,
            &self.ratio.valid_view,
            self.config.linear_threshold,
        )
        .expect("universe is non-empty")
    }
}
