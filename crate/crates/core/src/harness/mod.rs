//! Experiment driver: datasets per kernel, calibrated labels per rollback
//! ratio, predictor sizing, selection, training, evaluation and energy
//! accounting for every cell of the configured grid.

mod config;
mod report;

pub use config::{
    derive_seed, EnergyConfig, ExperimentConfig, KernelEnergy, OracleConfig, TimingConfig,
};
pub use report::{
    result_rows, write_oracle, write_run, write_sweep, write_timing, OracleRow, ResultRow, SweepSummaryRow,
    TimingRow, UniverseRow,
};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::dataset::{generate_dataset, Calibration, Dataset, FeatureId, FeatureRole};
use crate::dfg::ScheduledDfg;
use crate::energy::{energy_report, realized_predictor_energy, EnergyReport};
use crate::error::{Error, Result};
use crate::kernels::{build_kernel, KernelName};
use crate::predictors::{
    check_tree_constraints, DecisionTree, LinearPredictor, Metrics, Predictor, TrainView,
};
use crate::selection::{
    exhaustive_select, select, Algorithm, AvailabilityConstraint, SelectionProblem,
    SelectionResult,
};
use crate::sizing::{
    size_linear, size_tree, AcceleratorEnergy, EnergyParams, PredictorKind, TimingParams,
};

/// Which features a cell may draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Inputs, intermediates and outputs under the availability limits.
    Aware,
    /// Accelerator inputs only.
    InputsOnly,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Aware => "aware",
            FeatureMode::InputsOnly => "inputs_only",
        }
    }
}

/// One simulated kernel and its dataset.
pub struct KernelData {
    pub kernel: KernelName,
    pub dfg: ScheduledDfg,
    pub dataset: Dataset,
    pub accelerator: AcceleratorEnergy,
}

/// One rollback ratio: calibrated partitions and their training views.
pub struct RatioData {
    pub ratio: f64,
    pub train: Dataset,
    pub test: Dataset,
    pub calibration: Calibration,
    pub train_view: TrainView,
    pub fit_view: TrainView,
    pub valid_view: TrainView,
}

pub fn prepare_kernel(config: &ExperimentConfig, kernel: KernelName) -> Result<KernelData> {
    let dfg = build_kernel(kernel, &config.kernel_params)?;
    let seed = derive_seed(config.seed, &format!("data/{kernel}"));
    let dataset = generate_dataset(&dfg, kernel.default_sampler(), config.samples, &config.format, seed)?;
    let accelerator = config.energy.ops.accelerator(&dfg, &config.format);
    Ok(KernelData {
        kernel,
        dfg,
        dataset,
        accelerator,
    })
}

pub fn prepare_ratio(config: &ExperimentConfig, data: &KernelData, ratio: f64) -> Result<RatioData> {
    let kernel = data.kernel;
    let split_seed = derive_seed(config.seed, &format!("split/{kernel}"));
    let (train, test, calibration) =
        data.dataset
            .split_labeled(config.train_fraction, ratio, split_seed)?;
    let inner_seed = derive_seed(config.seed, &format!("inner/{kernel}/{ratio}"));
    let (fit, valid) = train.split(config.fit_fraction, inner_seed)?;
    Ok(RatioData {
        ratio,
        train_view: TrainView::new(&train)?,
        fit_view: TrainView::new(&fit)?,
        valid_view: TrainView::new(&valid)?,
        train,
        test,
        calibration,
    })
}

/// The sized predictor and availability limits of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSetup {
    pub timing: TimingParams,
    pub energy: EnergyParams,
    /// Feature bound (linear) or depth (tree).
    pub bound: u32,
    pub by_time: u32,
    pub by_energy: u32,
    /// Features requested from the selection algorithm.
    pub k: usize,
    pub constraint: AvailabilityConstraint,
}

pub fn setup_cell(
    config: &ExperimentConfig,
    data: &KernelData,
    ratio: f64,
    kind: PredictorKind,
    extra_cycles: u32,
) -> Result<CellSetup> {
    let unit = config.energy.kernel(data.kernel);
    let timing = TimingParams::new(
        data.dfg.latency,
        extra_cycles,
        config.timing.t_mac,
        config.timing.t_traverse,
    )?;
    let energy = EnergyParams {
        e_accelerator: data.accelerator.approximate,
        e_rollback: data.accelerator.exact,
        e_exact: data.accelerator.exact,
        e_mac: unit.e_mac,
        e_traverse: unit.e_traverse,
        e_predictor_budget: unit.e_predictor_budget,
        alpha: config.energy.alpha,
        rollback_rate: ratio,
    };
    let descriptors = &data.dataset.descriptors;
    let mode = config.constraint_mode;
    Ok(match kind {
        PredictorKind::Linear => {
            let s = size_linear(&timing, &energy)?;
            CellSetup {
                timing,
                energy,
                bound: s.features,
                by_time: s.by_time,
                by_energy: s.by_energy,
                k: s.features as usize,
                constraint: AvailabilityConstraint::new(descriptors, &timing, s.by_energy, 0, mode),
            }
        }
        PredictorKind::Tree => {
            let s = size_tree(&timing, &energy)?;
            CellSetup {
                timing,
                energy,
                bound: s.depth,
                by_time: s.by_time,
                by_energy: s.by_energy,
                k: config.tree_feature_target.unwrap_or(s.depth as usize),
                constraint: AvailabilityConstraint::new(descriptors, &timing, 0, s.depth, mode),
            }
        }
    })
}

/// Outcome of one (kernel, ratio, predictor, algorithm, extra cycles, mode)
/// cell.
#[derive(Clone, Debug, Serialize)]
pub struct CellResult {
    pub kernel: KernelName,
    pub ratio: f64,
    pub predictor_kind: PredictorKind,
    pub algorithm: Algorithm,
    pub extra_cycles: u32,
    pub mode: FeatureMode,
    pub status: String,
    pub seed: u64,
    pub universe: Vec<FeatureId>,
    pub selection: Option<SelectionResult>,
    pub predictor: Option<Predictor>,
    pub metrics: Metrics,
    pub energy: Option<EnergyReport>,
    #[serde(skip)]
    pub runtime_ms: f64,
}

impl CellResult {
    /// Linear: selected feature count; tree: trained depth.
    pub fn size(&self) -> usize {
        match &self.predictor {
            Some(Predictor::Linear(p)) => p.selected_features.len(),
            Some(Predictor::Tree(t)) => t.depth() as usize,
            None => 0,
        }
    }

    fn sort_key(&self) -> (&'static str, u64, PredictorKind, u32, FeatureMode, Algorithm) {
        (
            self.kernel.as_str(),
            (self.ratio * 1e9).round() as u64,
            self.predictor_kind,
            self.extra_cycles,
            self.mode,
            self.algorithm,
        )
    }
}

/// Everything a grid run produced.
#[derive(Debug, Default)]
pub struct RunReport {
    pub config_hash: String,
    pub cells: Vec<CellResult>,
    pub setups: Vec<SetupRecord>,
    pub universes: Vec<UniverseRow>,
    pub invariant_failures: Vec<String>,
}

/// The sizing and limits used by one group of cells, kept for the JSON
/// artifacts.
#[derive(Clone, Debug, Serialize)]
pub struct SetupRecord {
    pub kernel: KernelName,
    pub ratio: f64,
    pub predictor: PredictorKind,
    pub extra_cycles: u32,
    pub lambda: u32,
    pub calibration: Calibration,
    pub train_positive_rate: f64,
    pub test_positive_rate: f64,
    pub setup: Option<CellSetup>,
    pub error: Option<String>,
}

fn all_negative(test: &Dataset) -> Metrics {
    Metrics::from_pairs(test.samples.iter().map(|s| (s.label, false)))
}

fn train_final(
    kind: PredictorKind,
    rd: &RatioData,
    setup: &CellSetup,
    selected: &[FeatureId],
    config: &ExperimentConfig,
) -> Result<Predictor> {
    match kind {
        PredictorKind::Linear => Ok(Predictor::Linear(LinearPredictor::fit_view(
            &rd.train_view,
            selected,
            config.linear_threshold,
        )?)),
        PredictorKind::Tree => {
            let mut params = crate::predictors::TreeParams::new(setup.bound);
            params.min_samples_leaf = config.min_samples_leaf;
            Ok(Predictor::Tree(DecisionTree::fit_view(
                &rd.train_view,
                selected,
                params,
                &setup.constraint.afl_tree,
            )?))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    config: &ExperimentConfig,
    kd: &KernelData,
    rd: &RatioData,
    kind: PredictorKind,
    extra: u32,
    setup: &CellSetup,
    mode: FeatureMode,
    algorithm: Algorithm,
    failures: &mut Vec<String>,
) -> Result<CellResult> {
    let kernel = kd.kernel;
    let inputs: Vec<FeatureId> = kd
        .dataset
        .descriptors
        .iter()
        .filter(|d| d.role == FeatureRole::Input)
        .map(|d| d.feature_id)
        .collect();
    let candidates = match mode {
        FeatureMode::Aware => None,
        FeatureMode::InputsOnly => Some(inputs.as_slice()),
    };
    let mut problem = SelectionProblem::new(
        kind,
        setup.k,
        &setup.constraint,
        candidates,
        &rd.train_view,
        &rd.fit_view,
        &rd.valid_view,
        config.linear_threshold,
    )?;
    problem.tree.min_samples_leaf = config.min_samples_leaf;
    let label = format!(
        "{kernel}/{}/{kind}/{extra}/{}/{algorithm}",
        rd.ratio,
        mode.as_str()
    );
    let seed = derive_seed(config.seed, &label);
    let start = Instant::now();
    let selection = select(algorithm, &problem, &config.selection, seed);
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut cell = CellResult {
        kernel,
        ratio: rd.ratio,
        predictor_kind: kind,
        algorithm,
        extra_cycles: extra,
        mode,
        status: "ok".into(),
        seed,
        universe: problem.universe.clone(),
        selection: None,
        predictor: None,
        metrics: all_negative(&rd.test),
        energy: None,
        runtime_ms,
    };
    let selection = match selection {
        Ok(s) => s,
        Err(e) => {
            failures.push(format!("{label}: selection failed: {e}"));
            cell.status = format!("error: {e}");
            return Ok(cell);
        }
    };
    if !selection.feasible || !setup.constraint.is_feasible(kind, &selection.selected, setup.k) {
        failures.push(format!("{label}: infeasible selection {:?}", selection.selected));
    }
    if selection.selected.is_empty() {
        cell.status = "empty_selection".into();
    } else {
        match train_final(kind, rd, setup, &selection.selected, config) {
            Ok(predictor) => {
                if let Predictor::Tree(t) = &predictor {
                    if let Err(v) = check_tree_constraints(t, &setup.constraint.afl_tree, setup.bound)
                    {
                        failures.push(format!("{label}: tree split violates availability: {v:?}"));
                    }
                }
                if let Predictor::Linear(p) = &predictor {
                    if p.rank_deficient {
                        log::warn!("{label}: rank-deficient linear fit");
                    }
                }
                cell.metrics = predictor.evaluate(&rd.test)?;
                cell.predictor = Some(predictor);
            }
            Err(Error::NoRootFeature) => cell.status = "no_root_feature".into(),
            Err(e) => return Err(e),
        }
    }
    let e_pred = cell.predictor.as_ref().map_or(0.0, |p| {
        realized_predictor_energy(p, &rd.test, &setup.energy, config.energy.tree_energy)
    });
    cell.energy = Some(energy_report(&cell.metrics, &setup.energy, e_pred));
    cell.selection = Some(selection);
    Ok(cell)
}

/// Runs every configured cell for each value in `extras`.
pub fn run_grid(config: &ExperimentConfig, extras: &[u32]) -> Result<RunReport> {
    config.validate()?;
    let mut report = RunReport {
        config_hash: config.hash(),
        ..Default::default()
    };
    let mut modes = vec![FeatureMode::Aware];
    if config.inputs_only_baseline {
        modes.push(FeatureMode::InputsOnly);
    }
    for &kernel in &config.kernels {
        let kd = prepare_kernel(config, kernel)?;
        log::info!(
            "{kernel}: {} features, latency {}",
            kd.dfg.feature_count(),
            kd.dfg.latency
        );
        for &ratio in &config.rollback_ratios {
            let rd = prepare_ratio(config, &kd, ratio)?;
            for &kind in &config.predictors {
                let mut universes: Vec<(u32, Vec<FeatureId>)> = Vec::new();
                for &extra in extras {
                    let mut record = SetupRecord {
                        kernel,
                        ratio,
                        predictor: kind,
                        extra_cycles: extra,
                        lambda: kd.dfg.latency,
                        calibration: rd.calibration,
                        train_positive_rate: rd.train.positive_rate(),
                        test_positive_rate: rd.test.positive_rate(),
                        setup: None,
                        error: None,
                    };
                    let setup = match setup_cell(config, &kd, ratio, kind, extra) {
                        Ok(s) => s,
                        Err(e) => {
                            log::warn!("{kernel}/{ratio}/{kind}/{extra}: {e}");
                            record.error = Some(e.to_string());
                            report.setups.push(record);
                            for &mode in &modes {
                                for &algorithm in &config.algorithms {
                                    report.cells.push(failed_cell(
                                        &kd, &rd, kind, extra, mode, algorithm, &e,
                                    ));
                                }
                            }
                            continue;
                        }
                    };
                    let aware = setup.constraint.feasible_universe(kind);
                    let inputs_universe: Vec<FeatureId> = aware
                        .iter()
                        .copied()
                        .filter(|&f| kd.dataset.descriptors[f].role == FeatureRole::Input)
                        .collect();
                    if !inputs_universe.iter().all(|f| aware.contains(f)) {
                        report
                            .invariant_failures
                            .push(format!("{kernel}/{ratio}/{kind}/{extra}: baseline not contained"));
                    }
                    if ratio == config.rollback_ratios[0] {
                        report.universes.push(UniverseRow {
                            kernel: kernel.as_str().into(),
                            predictor: kind.as_str().into(),
                            extra_cycles: extra,
                            tau_const: setup.timing.tau_const(),
                            aware: aware.len(),
                            inputs_only: inputs_universe.len(),
                            total: kd.dataset.feature_count(),
                        });
                    }
                    universes.push((extra, aware));
                    for &mode in &modes {
                        for &algorithm in &config.algorithms {
                            let cell = run_cell(
                                config,
                                &kd,
                                &rd,
                                kind,
                                extra,
                                &setup,
                                mode,
                                algorithm,
                                &mut report.invariant_failures,
                            )?;
                            log::debug!(
                                "{kernel}/{ratio}/{kind}/{extra}/{}/{algorithm}: f1 {:.3} in {:.0} ms",
                                mode.as_str(),
                                cell.metrics.f1,
                                cell.runtime_ms
                            );
                            report.cells.push(cell);
                        }
                    }
                    record.setup = Some(setup);
                    report.setups.push(record);
                }
                universes.sort_by_key(|(e, _)| *e);
                for w in universes.windows(2) {
                    let (e0, u0) = &w[0];
                    let (e1, u1) = &w[1];
                    if !u0.iter().all(|f| u1.contains(f)) {
                        report.invariant_failures.push(format!(
                            "{kernel}/{ratio}/{kind}: feasible universe shrank from {e0} to {e1} extra cycles"
                        ));
                    }
                }
            }
        }
    }
    report.cells.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(report)
}

fn failed_cell(
    kd: &KernelData,
    rd: &RatioData,
    kind: PredictorKind,
    extra: u32,
    mode: FeatureMode,
    algorithm: Algorithm,
    error: &Error,
) -> CellResult {
    CellResult {
        kernel: kd.kernel,
        ratio: rd.ratio,
        predictor_kind: kind,
        algorithm,
        extra_cycles: extra,
        mode,
        status: format!("infeasible: {error}"),
        seed: 0,
        universe: Vec::new(),
        selection: None,
        predictor: None,
        metrics: all_negative(&rd.test),
        energy: None,
        runtime_ms: 0.0,
    }
}

/// The configured grid at `run_extra_cycles`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    run_grid(config, &[config.run_extra_cycles])
}

/// Mean selection wall-clock per (algorithm, kernel), over rollback ratios
/// and predictor kinds, for the scheduling-aware cells.
pub fn run_selection_timing(config: &ExperimentConfig) -> Result<Vec<TimingRow>> {
    let mut c = config.clone();
    c.inputs_only_baseline = false;
    let report = run_experiment(&c)?;
    Ok(timing_table(&report))
}

pub fn timing_table(report: &RunReport) -> Vec<TimingRow> {
    let mut groups: BTreeMap<(Algorithm, &'static str), Vec<f64>> = BTreeMap::new();
    for cell in report
        .cells
        .iter()
        .filter(|c| c.mode == FeatureMode::Aware && c.selection.is_some())
    {
        groups
            .entry((cell.algorithm, cell.kernel.as_str()))
            .or_default()
            .push(cell.runtime_ms);
    }
    groups
        .into_iter()
        .map(|((algorithm, kernel), times)| TimingRow {
            algorithm: algorithm.as_str().into(),
            kernel: kernel.into(),
            kind: if algorithm.is_filter() { "filter" } else { "wrapper" }.into(),
            mean_ms: times.iter().sum::<f64>() / times.len() as f64,
            max_ms: times.iter().copied().fold(0.0, f64::max),
            runs: times.len(),
        })
        .collect()
}

/// The grid over every configured extra-cycle value, with mean F1 across
/// kernels per (predictor, algorithm, extra cycles, mode).
pub fn run_extra_cycles_sweep(config: &ExperimentConfig) -> Result<(RunReport, Vec<SweepSummaryRow>)> {
    let report = run_grid(config, &config.extra_cycles)?;
    let summary = sweep_summary(&report);
    Ok((report, summary))
}

pub fn sweep_summary(report: &RunReport) -> Vec<SweepSummaryRow> {
    let mut groups: BTreeMap<(PredictorKind, Algorithm, u32, FeatureMode, u64), Vec<f64>> =
        BTreeMap::new();
    for c in &report.cells {
        groups
            .entry((
                c.predictor_kind,
                c.algorithm,
                c.extra_cycles,
                c.mode,
                (c.ratio * 1e9).round() as u64,
            ))
            .or_default()
            .push(c.metrics.f1);
    }
    groups
        .into_iter()
        .map(|((kind, algorithm, extra, mode, ratio), f1s)| SweepSummaryRow {
            predictor: kind.as_str().into(),
            algorithm: algorithm.as_str().into(),
            ratio: ratio as f64 / 1e9,
            extra_cycles: extra,
            mode: mode.as_str().into(),
            kernels: f1s.len(),
            mean_f1: f1s.iter().sum::<f64>() / f1s.len() as f64,
        })
        .collect()
}

/// Compares every search against exhaustive enumeration on the configured
/// small kernel, scoring each on the validation split.
pub fn run_oracle(config: &ExperimentConfig) -> Result<Vec<OracleRow>> {
    config.validate()?;
    let oc = &config.oracle;
    let kd = prepare_kernel(config, oc.kernel)?;
    let rd = prepare_ratio(config, &kd, oc.ratio)?;
    let mut rows = Vec::new();
    for &kind in &config.predictors {
        let setup = setup_cell(config, &kd, oc.ratio, kind, config.run_extra_cycles)?;
        let problem = || -> Result<SelectionProblem<'_>> {
            let mut p = SelectionProblem::new(
                kind,
                setup.k,
                &setup.constraint,
                None,
                &rd.train_view,
                &rd.fit_view,
                &rd.valid_view,
                config.linear_threshold,
            )?;
            p.tree.min_samples_leaf = config.min_samples_leaf;
            Ok(p)
        };
        let (exhaustive, exhaustive_selected) = {
            let p = problem()?;
            let r = exhaustive_select(&p)?;
            (p.merit(&r.selected), r.selected)
        };
        let mut push = |algorithm: Algorithm, seeds: Vec<u64>, merit: f64, selected: Vec<FeatureId>| {
            rows.push(OracleRow {
                kernel: oc.kernel.as_str().into(),
                predictor: kind.as_str().into(),
                algorithm: algorithm.as_str().into(),
                seeds: seeds.len(),
                universe: setup.constraint.feasible_universe(kind).len(),
                k: setup.k,
                selected: format!("{selected:?}"),
                merit,
                exhaustive,
                gap: exhaustive - merit,
                within_tolerance: merit >= exhaustive - oc.tolerance,
            });
        };
        for algorithm in [Algorithm::Sfs, Algorithm::Sbe] {
            let p = problem()?;
            let r = select(algorithm, &p, &config.selection, 0)?;
            push(algorithm, vec![0], p.merit(&r.selected), r.selected);
        }
        for algorithm in [Algorithm::Pso, Algorithm::Qga] {
            let p = problem()?;
            let seeds: Vec<u64> = (0..oc.seeds)
                .map(|i| derive_seed(config.seed, &format!("oracle/{kind}/{algorithm}/{i}")))
                .collect();
            let mut best: Option<(f64, Vec<FeatureId>)> = None;
            for &seed in &seeds {
                let r = select(algorithm, &p, &config.selection, seed)?;
                let m = p.merit(&r.selected);
                if best.as_ref().is_none_or(|(b, _)| m > *b) {
                    best = Some((m, r.selected));
                }
            }
            let (m, s) = best.unwrap_or_default();
            push(algorithm, seeds, m, s);
        }
        push(Algorithm::Exhaustive, vec![0], exhaustive, exhaustive_selected);
    }
    Ok(rows)
}
