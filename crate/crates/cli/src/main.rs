use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::{error, info};
use schedsel_core::dataset::describe_features;
use schedsel_core::harness::{self, ExperimentConfig};
use schedsel_core::{build_kernel, KernelName, KernelParams};

#[derive(Parser)]
#[command(name = "schedsel", version, about = "Scheduling-aware error-predictor experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured grid and write results.csv plus JSON artifacts.
    Run(Args),
    /// Time every selection algorithm on every configured kernel.
    Timing(Args),
    /// Sweep extra prediction cycles.
    SweepCycles(Args),
    /// Compare the searches against exhaustive enumeration on a small kernel.
    Oracle(Args),
    /// Print a kernel's schedule and feature availability.
    Dfg {
        kernel: KernelName,
    },
}

#[derive(clap::Args)]
struct Args {
    /// TOML experiment configuration.
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Args {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let config = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        let out = self.output.clone().unwrap_or_else(|| config.output_dir.clone());
        Ok((config, out))
    }
}

fn report_failures(failures: &[String]) -> ExitCode {
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    for f in failures {
        error!("invariant violated: {f}");
    }
    ExitCode::FAILURE
}

fn run(args: &Args) -> Result<ExitCode> {
    let (config, out) = args.load()?;
    let report = harness::run_experiment(&config)?;
    harness::write_run(&report, &config, &out)
        .with_context(|| format!("writing to {}", out.display()))?;
    info!("{} cells written to {}", report.cells.len(), out.display());
    Ok(report_failures(&report.invariant_failures))
}

fn timing(args: &Args) -> Result<ExitCode> {
    let (config, out) = args.load()?;
    let rows = harness::run_selection_timing(&config)?;
    for r in &rows {
        println!(
            "{:<10} {:<8} {:<7} mean {:>10.3} ms  max {:>10.3} ms",
            r.kernel, r.algorithm, r.kind, r.mean_ms, r.max_ms
        );
    }
    harness::write_timing(&rows, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: &Args) -> Result<ExitCode> {
    let (config, out) = args.load()?;
    let (report, summary) = harness::run_extra_cycles_sweep(&config)?;
    for r in &summary {
        println!(
            "{:<6} {:<8} r={:<5} x={:<2} {:<11} mean F1 {:.4}",
            r.predictor, r.algorithm, r.ratio, r.extra_cycles, r.mode, r.mean_f1
        );
    }
    harness::write_sweep(&report, &summary, &config, &out)?;
    Ok(report_failures(&report.invariant_failures))
}

fn oracle(args: &Args) -> Result<ExitCode> {
    let (config, out) = args.load()?;
    let rows = harness::run_oracle(&config)?;
    for r in &rows {
        println!(
            "{:<6} {:<10} F1 {:.4}  best {:.4}  gap {:+.4}  {}",
            r.predictor,
            r.algorithm,
            r.merit,
            r.exhaustive,
            r.gap,
            if r.within_tolerance { "ok" } else { "outside tolerance" }
        );
    }
    harness::write_oracle(&rows, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn dfg(kernel: KernelName) -> Result<ExitCode> {
    let dfg = build_kernel(kernel, &KernelParams::default())?;
    println!("{}: latency {} cycles", dfg.name, dfg.latency);
    for d in describe_features(&dfg) {
        let node = &dfg.nodes[d.node_id];
        println!(
            "f{:<3} {:<12} {:?} available at cycle {}",
            d.feature_id, node.label, d.role, d.availability_cycle
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Timing(a) => timing(a),
        Command::SweepCycles(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
        Command::Dfg { kernel } => dfg(*kernel),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
