//! Accuracy over a grid of ray counts, ray lengths and weight functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rbc_core::classifier::{evaluate_design, train_member, Design, EvalReport, MlpModel, TrainConfig};
use rbc_core::fingerprint::WeightFn;
use rbc_core::qdsim::ParamRanges;
use rbc_core::rayscan::RayConfig;
use rbc_core::seed;
use rbc_core::sigproc::PeakConfig;
use rbc_core::{RbcError, Result};

use crate::dataset::{gen_features, weigh, DatasetSpec, SamplingBox};
use crate::reduction::{data_reduction, BASELINE_PX};

/// Epochs for the reference ensembles; accuracy has levelled off by then.
pub const REFERENCE_EPOCHS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub ms: Vec<usize>,
    pub lengths: Vec<usize>,
    pub weights: Vec<WeightFn>,
    pub models_per_cell: usize,
    pub px_mv: f64,
    pub train_devices: usize,
    pub train_per_device: usize,
    pub test_devices: usize,
    pub test_per_device: usize,
    pub train: TrainConfig,
    pub peaks: PeakConfig,
    pub ranges: ParamRanges,
    pub sampling: SamplingBox,
    pub baseline_px: usize,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            ms: vec![5, 6, 7, 9, 12],
            lengths: (20..=80).step_by(4).collect(),
            weights: vec![WeightFn::Inv],
            models_per_cell: 20,
            px_mv: 0.5,
            train_devices: 20,
            train_per_device: 1350,
            test_devices: 5,
            test_per_device: 200,
            train: TrainConfig::default(),
            peaks: PeakConfig::default(),
            ranges: ParamRanges::default(),
            sampling: SamplingBox::default(),
            baseline_px: BASELINE_PX,
            seed: 0,
        }
    }
}

impl SweepSpec {
    /// Six rays of 60 px, the setup used for tuning, with 40 training epochs.
    pub fn reference(weights: Vec<WeightFn>) -> Self {
        Self { train: TrainConfig { epochs: REFERENCE_EPOCHS, ..Default::default() }, ..Self::cell(6, 60, weights) }
    }

    /// A single `(m, l_px)` cell over `weights`.
    pub fn cell(m: usize, l_px: usize, weights: Vec<WeightFn>) -> Self {
        Self { ms: vec![m], lengths: vec![l_px], weights, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ms.is_empty() || self.lengths.is_empty() || self.weights.is_empty() {
            return Err(RbcError::Config("sweep grid needs ray counts, lengths and weights".into()));
        }
        if let Some(l) = self.lengths.iter().find(|l| !(8..=200).contains(*l)) {
            return Err(RbcError::Config(format!("ray length {l} px outside [8, 200]")));
        }
        if self.models_per_cell == 0 {
            return Err(RbcError::Config("need at least one model per cell".into()));
        }
        for &m in &self.ms {
            RayConfig::new(m, self.lengths[0], self.px_mv)?;
        }
        self.train.validate()
    }

    pub fn train_dataset(&self, ray: RayConfig) -> DatasetSpec {
        self.dataset(ray, true)
    }

    pub fn test_dataset(&self, ray: RayConfig) -> DatasetSpec {
        self.dataset(ray, false)
    }

    fn dataset(&self, ray: RayConfig, train: bool) -> DatasetSpec {
        let (n_devices, per_device, name) = if train {
            (self.train_devices, self.train_per_device, "train-data")
        } else {
            (self.test_devices, self.test_per_device, "test-data")
        };
        DatasetSpec {
            n_devices,
            per_device,
            ray,
            weight: WeightFn::Inv,
            seed: seed::derive(self.seed, name, 0),
            ranges: self.ranges.clone(),
            peaks: self.peaks,
            sampling: self.sampling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub l_px: usize,
    pub weight: WeightFn,
    pub models: usize,
    pub mean: f64,
    pub std: f64,
    pub pixels: usize,
    pub delta: i64,
}

/// One finished cell, with the trained ensemble.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub row: SweepRow,
    pub report: EvalReport,
    pub models: Vec<MlpModel>,
}

/// Ensemble for one training set; member `k` is the same for every cell.
pub fn train_ensemble(train: &Design, cfg: &TrainConfig, n: usize, root: u64) -> Result<Vec<MlpModel>> {
    let ensemble_root = seed::derive(root, "ensemble", 0);
    (0..n)
        .into_par_iter()
        .map(|k| train_member(train, cfg, ensemble_root, k).map(|(m, _)| m))
        .collect()
}

/// Trains and evaluates every cell; rows come back ordered by `(m, l_px, weight)`.
///
/// Training and test sets are drawn once per `(m, l_px)` and shared by all weights.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    spec.validate()?;
    let mut ms = spec.ms.clone();
    let mut lengths = spec.lengths.clone();
    let mut weights = spec.weights.clone();
    ms.sort_unstable();
    ms.dedup();
    lengths.sort_unstable();
    lengths.dedup();
    weights.sort_unstable();
    weights.dedup();

    let mut cells = Vec::new();
    for &m in &ms {
        for &l_px in &lengths {
            let ray = RayConfig::new(m, l_px, spec.px_mv)?;
            let train = gen_features(&spec.train_dataset(ray))?;
            let test = gen_features(&spec.test_dataset(ray))?;
            for &weight in &weights {
                let train_set = Design::from_records(&weigh(&train, &ray, weight)?)?;
                let test_set = Design::from_records(&weigh(&test, &ray, weight)?)?;
                let models = train_ensemble(&train_set, &spec.train, spec.models_per_cell, spec.seed)?;
                let report = evaluate_design(&models, &test_set)?;
                let row = SweepRow {
                    m,
                    l_px,
                    weight,
                    models: models.len(),
                    mean: report.mean,
                    std: report.std,
                    pixels: ray.total_pixels(),
                    delta: data_reduction(m, l_px, spec.baseline_px)?,
                };
                cells.push(SweepCell { row, report, models });
            }
        }
    }
    Ok(cells)
}

pub const SWEEP_HEADER: &str = "m,l_px,weight,models,mean_accuracy,std_accuracy,pixels,data_reduction";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.m,
            r.l_px,
            r.weight.id(),
            r.models,
            r.mean,
            r.std,
            r.pixels,
            r.delta
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(SweepSpec { lengths: vec![4], ..Default::default() }.validate().is_err());
        assert!(SweepSpec { weights: vec![], ..Default::default() }.validate().is_err());
        assert!(SweepSpec::default().validate().is_ok());
        assert_eq!(SweepSpec::default().lengths.len(), 16);
    }
}
