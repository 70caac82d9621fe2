//! Flat CSV and JSON report files.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{CellResult, ExperimentConfig, RunReport, SetupRecord};
use crate::error::Result;

/// One line of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub kernel: String,
    pub ratio: f64,
    pub predictor: String,
    pub algorithm: String,
    pub extra_cycles: u32,
    pub mode: String,
    pub n_features_or_depth: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub normalized_energy: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub constraint_mode: String,
    pub status: String,
}

impl ResultRow {
    pub fn from_cell(cell: &CellResult, config: &ExperimentConfig, config_hash: &str) -> Self {
        let m = &cell.metrics;
        Self {
            kernel: cell.kernel.as_str().into(),
            ratio: cell.ratio,
            predictor: cell.predictor_kind.as_str().into(),
            algorithm: cell.algorithm.as_str().into(),
            extra_cycles: cell.extra_cycles,
            mode: cell.mode.as_str().into(),
            n_features_or_depth: cell.size(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            fpr: m.fpr,
            fnr: m.fnr,
            normalized_energy: cell.energy.map(|e| e.normalized_energy),
            runtime_ms: config.record_runtime.then_some(cell.runtime_ms),
            seed: cell.seed,
            config_hash: config_hash.into(),
            constraint_mode: config.constraint_mode.as_str().into(),
            status: cell.status.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub algorithm: String,
    pub kernel: String,
    pub kind: String,
    pub mean_ms: f64,
    pub max_ms: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniverseRow {
    pub kernel: String,
    pub predictor: String,
    pub extra_cycles: u32,
    pub tau_const: u32,
    pub aware: usize,
    pub inputs_only: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummaryRow {
    pub predictor: String,
    pub algorithm: String,
    pub ratio: f64,
    pub extra_cycles: u32,
    pub mode: String,
    pub kernels: usize,
    pub mean_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    pub kernel: String,
    pub predictor: String,
    pub algorithm: String,
    pub seeds: usize,
    pub universe: usize,
    pub k: usize,
    pub selected: String,
    pub merit: f64,
    pub exhaustive: f64,
    pub gap: f64,
    pub within_tolerance: bool,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Artifact<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    setup: &'a SetupRecord,
    cells: Vec<&'a CellResult>,
}

pub fn result_rows(report: &RunReport, config: &ExperimentConfig) -> Vec<ResultRow> {
    report
        .cells
        .iter()
        .map(|c| ResultRow::from_cell(c, config, &report.config_hash))
        .collect()
}

fn write_cells(report: &RunReport, config: &ExperimentConfig, dir: &Path, csv_name: &str) -> Result<()> {
    fs::create_dir_all(dir.join("artifacts"))?;
    write_csv(&dir.join(csv_name), &result_rows(report, config))?;
    for setup in &report.setups {
        let cells: Vec<&CellResult> = report
            .cells
            .iter()
            .filter(|c| {
                c.kernel == setup.kernel
                    && c.ratio == setup.ratio
                    && c.predictor_kind == setup.predictor
                    && c.extra_cycles == setup.extra_cycles
            })
            .collect();
        let name = format!(
            "{}_r{:03}_{}_x{}.json",
            setup.kernel,
            (setup.ratio * 100.0).round() as u32,
            setup.predictor,
            setup.extra_cycles
        );
        let artifact = Artifact {
            config_hash: &report.config_hash,
            setup,
            cells,
        };
        fs::write(
            dir.join("artifacts").join(name),
            serde_json::to_string_pretty(&artifact)?,
        )?;
    }
    fs::write(dir.join("config.toml"), config.to_toml()?)?;
    if !report.invariant_failures.is_empty() {
        fs::write(
            dir.join("invariant_failures.txt"),
            report.invariant_failures.join("\n") + "\n",
        )?;
    }
    Ok(())
}

/// `results.csv`, `artifacts/*.json` and a copy of the configuration.
pub fn write_run(report: &RunReport, config: &ExperimentConfig, dir: &Path) -> Result<()> {
    write_cells(report, config, dir, "results.csv")
}

/// `sweep.csv` with every cell, `sweep_summary.csv` with mean F1 per extra
/// cycle count, and `universe.csv` with feasible-universe sizes.
pub fn write_sweep(
    report: &RunReport,
    summary: &[SweepSummaryRow],
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<()> {
    write_cells(report, config, dir, "sweep.csv")?;
    write_csv(&dir.join("sweep_summary.csv"), summary)?;
    write_csv(&dir.join("universe.csv"), &report.universes)
}

pub fn write_timing(rows: &[TimingRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("timing.csv"), rows)
}

pub fn write_oracle(rows: &[OracleRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("oracle.csv"), rows)
}
