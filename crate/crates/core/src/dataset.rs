//! Labeled invocation datasets harvested by co-simulating the exact and
//! approximate datapaths.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dfg::{EvalMode, NodeId, OpKind, ScheduledDfg};
use crate::error::{Error, Result};
use crate::fixed::FixedPointFormat;
use crate::kernels::InputSampler;

pub type FeatureId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRole {
    Input,
    Intermediate,
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub feature_id: FeatureId,
    pub node_id: NodeId,
    /// Cycle in which the value becomes readable.
    pub availability_cycle: u32,
    pub role: FeatureRole,
}

/// One feature per non-constant node, in node order.
pub fn describe_features(dfg: &ScheduledDfg) -> Vec<FeatureDescriptor> {
    dfg.feature_nodes()
        .enumerate()
        .map(|(feature_id, node)| FeatureDescriptor {
            feature_id,
            node_id: node.id,
            availability_cycle: dfg.finish_cycle[node.id],
            role: match node.kind {
                OpKind::Input => FeatureRole::Input,
                OpKind::Output => FeatureRole::Output,
                _ => FeatureRole::Intermediate,
            },
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Approximate-mode values in feature-id order.
    pub features: Vec<f64>,
    pub error: f64,
    /// Large error, i.e. the invocation must be rolled back.
    pub label: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labeling {
    pub threshold: f64,
    pub rollback_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub descriptors: Vec<FeatureDescriptor>,
    pub samples: Vec<Sample>,
    pub labeling: Option<Labeling>,
}

/// Mean relative absolute error over outputs, with the denominator floored at
/// `floor` (one fixed-point ULP).
pub fn error_metric(exact: &[f64], approx: &[f64], floor: f64) -> Result<f64> {
    if exact.len() != approx.len() {
        return Err(Error::LengthMismatch {
            expected: exact.len(),
            got: approx.len(),
        });
    }
    if exact.is_empty() {
        return Err(Error::InvalidParameter("error metric needs at least one output".into()));
    }
    let total: f64 = exact
        .iter()
        .zip(approx)
        .map(|(&e, &a)| (e - a).abs() / e.abs().max(floor))
        .sum();
    Ok(total / exact.len() as f64)
}

/// Simulates `n` invocations.
///
/// Inputs are drawn sequentially from one seeded stream; evaluation is then
/// parallel and order-stable.
pub fn generate_dataset(
    dfg: &ScheduledDfg,
    sampler: InputSampler,
    n: usize,
    fmt: &FixedPointFormat,
    seed: u64,
) -> Result<Dataset> {
    fmt.validate()?;
    let descriptors = describe_features(dfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_inputs = dfg.input_count();
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| sampler.draw(&mut rng, n_inputs)).collect();
    let outputs: Vec<NodeId> = dfg.outputs().collect();

    let evaluated: Result<Vec<(Sample, bool)>> = inputs
        .par_iter()
        .map(|x| {
            let exact = dfg.evaluate(x, EvalMode::Exact, fmt)?;
            let approx = dfg.evaluate(x, EvalMode::Approximate, fmt)?;
            let ex: Vec<f64> = outputs.iter().map(|&o| exact.values[o]).collect();
            let ap: Vec<f64> = outputs.iter().map(|&o| approx.values[o]).collect();
            let error = error_metric(&ex, &ap, fmt.ulp())?;
            let features = descriptors
                .iter()
                .map(|d| approx.values[d.node_id])
                .collect();
            Ok((
                Sample {
                    features,
                    error,
                    label: false,
                },
                exact.overflowed() || approx.overflowed(),
            ))
        })
        .collect();
    let evaluated = evaluated?;
    let saturated = evaluated.iter().filter(|(_, s)| *s).count();
    if saturated > 0 {
        log::warn!("{}: {saturated} of {n} invocations saturated", dfg.name);
    }
    Ok(Dataset {
        descriptors,
        samples: evaluated.into_iter().map(|(s, _)| s).collect(),
        labeling: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    /// Errors strictly above the threshold.
    pub positives: usize,
    /// No error exceeds the threshold although positives were requested.
    pub degenerate: bool,
}

/// Linear-interpolation quantile of sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Threshold at the `(1 - rollback_ratio)` quantile of `errors`.
pub fn calibrate_threshold(errors: &[f64], rollback_ratio: f64) -> Result<Calibration> {
    if errors.is_empty() {
        return Err(Error::EmptyErrors);
    }
    if !(rollback_ratio > 0.0 && rollback_ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rollback ratio must be in (0, 1), got {rollback_ratio}"
        )));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut threshold = quantile_sorted(&sorted, 1.0 - rollback_ratio);
    let mut positives = sorted.iter().filter(|&&e| e > threshold).count();

    // A tied block at the cut falls entirely below the quantile; flip it
    // positive when that lands nearer the target count.
    let target = rollback_ratio * sorted.len() as f64;
    let cut = sorted.len() - positives;
    if cut > 0 {
        let tied = sorted[cut - 1];
        let block = sorted.partition_point(|&e| e < tied);
        if block > 0 {
            let wider = sorted.len() - block;
            if (wider as f64 - target).abs() < (positives as f64 - target).abs() {
                threshold = sorted[block - 1] + (tied - sorted[block - 1]) / 2.0;
                positives = wider;
            }
        }
    }
    Ok(Calibration {
        threshold,
        positives,
        degenerate: positives == 0,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.descriptors.len()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.error).collect()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.label).count() as f64 / self.samples.len() as f64
    }

    pub fn threshold(&self) -> Result<f64> {
        self.labeling.map(|l| l.threshold).ok_or(Error::Unlabeled)
    }

    /// Sets `label = error > threshold` on every sample.
    pub fn apply_threshold(&mut self, threshold: f64, rollback_ratio: f64) {
        for s in &mut self.samples {
            s.label = s.error > threshold;
        }
        self.labeling = Some(Labeling {
            threshold,
            rollback_ratio,
        });
    }

    /// Seeded shuffle split. The first part gets `round(train_fraction * n)`
    /// samples.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train fraction must be in (0, 1), got {train_fraction}"
            )));
        }
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = (train_fraction * self.samples.len() as f64).round() as usize;
        let part = |idx: &[usize]| Dataset {
            descriptors: self.descriptors.clone(),
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            labeling: self.labeling,
        };
        Ok((part(&order[..cut]), part(&order[cut..])))
    }

    /// Splits, calibrates the threshold on the training part only and labels
    /// both parts with it.
    pub fn split_labeled(
        &self,
        train_fraction: f64,
        rollback_ratio: f64,
        seed: u64,
    ) -> Result<(Dataset, Dataset, Calibration)> {
        let (mut train, mut test) = self.split(train_fraction, seed)?;
        let calibration = calibrate_threshold(&train.errors(), rollback_ratio)?;
        train.apply_threshold(calibration.threshold, rollback_ratio);
        test.apply_threshold(calibration.threshold, rollback_ratio);
        Ok((train, test, calibration))
    }

    /// CSV with a `f<id>@c<cycle>` header followed by `error,label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self
            .descriptors
            .iter()
            .map(|d| format!("f{}@c{}", d.feature_id, d.availability_cycle))
            .collect();
        header.push("error".into());
        header.push("label".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
            row.push(s.error.to_string());
            row.push(u8::from(s.label).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads samples written by [`Dataset::write_csv`]; descriptors come from
    /// the JSON sidecar and must agree with the header.
    pub fn read_csv<R: Read>(
        reader: R,
        descriptors: Vec<FeatureDescriptor>,
        labeling: Option<Labeling>,
    ) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() != descriptors.len() + 2 {
            return Err(Error::LengthMismatch {
                expected: descriptors.len() + 2,
                got: header.len(),
            });
        }
        for (col, d) in header.iter().zip(&descriptors) {
            let expected = format!("f{}@c{}", d.feature_id, d.availability_cycle);
            if col != expected {
                return Err(Error::InvalidParameter(format!(
                    "column `{col}` does not match descriptor `{expected}`"
                )));
            }
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad number `{s}`: {e}")))
        };
        let mut samples = Vec::new();
        for record in r.records() {
            let record = record?;
            let n = descriptors.len();
            let features = (0..n).map(|i| parse(&record[i])).collect::<Result<_>>()?;
            let error = parse(&record[n])?;
            let label = match &record[n + 1] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(Error::InvalidParameter(format!("bad label `{other}`")));
                }
            };
            samples.push(Sample {
                features,
                error,
                label,
            });
        }
        Ok(Dataset {
            descriptors,
            samples,
            labeling,
        })
    }

    /// Writes `<stem>.csv` and the `<stem>.json` descriptor sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        let sidecar = Sidecar {
            descriptors: self.descriptors.clone(),
            labeling: self.labeling,
        };
        let json = serde_json::to_string_pretty(&sidecar)?;
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Dataset> {
        let sidecar: Sidecar =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        Dataset::read_csv(
            std::fs::File::open(dir.join(format!("{stem}.csv")))?,
            sidecar.descriptors,
            sidecar.labeling,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    descriptors: Vec<FeatureDescriptor>,
    labeling: Option<Labeling>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_kernel, KernelName, KernelParams};

    #[test]
    fn error_metric_examples() {
        assert_eq!(error_metric(&[10.0], &[10.0], 1.0 / 256.0).unwrap(), 0.0);
        assert!((error_metric(&[10.0], &[9.0], 1.0 / 256.0).unwrap() - 0.1).abs() < 1e-15);
        // |0 - 1| / 2^-8
        assert_eq!(error_metric(&[0.0], &[1.0], 1.0 / 256.0).unwrap(), 256.0);
        assert!(error_metric(&[1.0, 2.0], &[1.0], 1.0).is_err());
        assert!(error_metric(&[], &[], 1.0).is_err());
    }

    #[test]
    fn quantile_leaves_ten_of_hundred() {
        let errors: Vec<f64> = (1..=100).map(f64::from).collect();
        let c = calibrate_threshold(&errors, 0.10).unwrap();
        assert_eq!(c.positives, 10);
        assert!(!c.degenerate);
    }

    #[test]
    fn tied_block_goes_to_the_nearer_side() {
        // 85 small errors, then 12 equal ones, then 3 large ones
        let mut errors = vec![0.1; 85];
        errors.extend([0.5; 12]);
        errors.extend([0.9, 1.0, 1.1]);
        let c = calibrate_threshold(&errors, 0.10).unwrap();
        assert_eq!(c.positives, 15);
        assert!(c.threshold > 0.1 && c.threshold < 0.5);

        // flipping the block would overshoot further
        let mut errors = vec![0.1; 60];
        errors.extend([0.5; 32]);
        errors.extend([0.9; 8]);
        let c = calibrate_threshold(&errors, 0.10).unwrap();
        assert_eq!(c.positives, 8);
        assert_eq!(c.threshold, 0.5);
    }

    #[test]
    fn equal_errors_are_degenerate() {
        let c = calibrate_threshold(&[0.5; 40], 0.2).unwrap();
        assert_eq!(c.positives, 0);
        assert!(c.degenerate);
    }

    #[test]
    fn calibration_rejects_bad_input() {
        assert!(matches!(calibrate_threshold(&[], 0.1), Err(Error::EmptyErrors)));
        assert!(calibrate_threshold(&[1.0], 0.0).is_err());
        assert!(calibrate_threshold(&[1.0], 1.0).is_err());
    }

    fn fir_dataset(n: usize, fmt: FixedPointFormat, seed: u64) -> Dataset {
        let dfg = build_kernel(KernelName::Fir6, &KernelParams::default()).unwrap();
        generate_dataset(&dfg, InputSampler::Signed, n, &fmt, seed).unwrap()
    }

    #[test]
    fn empty_dataset_keeps_descriptors() {
        let d = fir_dataset(0, FixedPointFormat::default(), 1);
        assert!(d.is_empty());
        assert_eq!(d.feature_count(), 18);
    }

    #[test]
    fn no_truncation_means_no_error() {
        let d = fir_dataset(200, FixedPointFormat::default().with_truncation(0), 3);
        assert!(d.samples.iter().all(|s| s.error == 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = fir_dataset(300, FixedPointFormat::default(), 9);
        let b = fir_dataset(300, FixedPointFormat::default(), 9);
        assert_eq!(a, b);
        let c = fir_dataset(300, FixedPointFormat::default(), 10);
        assert_ne!(a, c);
    }

    #[test]
    fn features_follow_descriptors() {
        let dfg = build_kernel(KernelName::Sobel, &KernelParams::default()).unwrap();
        let fmt = FixedPointFormat::default();
        let d = generate_dataset(&dfg, InputSampler::Pixels, 20, &fmt, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for s in &d.samples {
            let x = InputSampler::Pixels.draw(&mut rng, 9);
            let trace = dfg.evaluate(&x, EvalMode::Approximate, &fmt).unwrap();
            for (k, desc) in d.descriptors.iter().enumerate() {
                assert_eq!(s.features[k], trace.values[desc.node_id]);
            }
        }
    }

    #[test]
    fn split_is_exhaustive_and_seeded() {
        let d = fir_dataset(5000, FixedPointFormat::default(), 5);
        let (a, b) = d.split(0.5, 77).unwrap();
        assert_eq!((a.len(), b.len()), (2500, 2500));
        let (a2, _) = d.split(0.5, 77).unwrap();
        assert_eq!(a, a2);
        let mut all: Vec<f64> = a.errors().into_iter().chain(b.errors()).collect();
        let mut orig = d.errors();
        all.sort_by(f64::total_cmp);
        orig.sort_by(f64::total_cmp);
        assert_eq!(all, orig);
    }

    #[test]
    fn labels_follow_threshold() {
        let d = fir_dataset(5000, FixedPointFormat::default(), 6);
        let (train, test, cal) = d.split_labeled(0.5, 0.1, 8).unwrap();
        for s in train.samples.iter().chain(&test.samples) {
            assert_eq!(s.label, s.error > cal.threshold);
        }
        assert!((train.positive_rate() - 0.1).abs() <= 0.005);
    }

    #[test]
    fn csv_round_trip() {
        let mut d = fir_dataset(50, FixedPointFormat::default(), 2);
        d.apply_threshold(0.01, 0.1);
        let dir = tempfile::tempdir().unwrap();
        d.save(dir.path(), "fir").unwrap();
        let header = std::fs::read_to_string(dir.path().join("fir.csv")).unwrap();
        assert!(header.starts_with("f0@c1,f1@c1,"));
        assert!(header.lines().next().unwrap().ends_with(",error,label"));
        assert_eq!(Dataset::load(dir.path(), "fir").unwrap(), d);
    }
}
