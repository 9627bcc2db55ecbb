//! Class-balanced fingerprint datasets drawn from randomized simulated devices.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rbc_core::fingerprint::{apply_weight, FingerprintRecord, WeightFn};
use rbc_core::qdsim::{make_device, DeviceParams, DeviceState, ParamRanges};
use rbc_core::rayscan::{acquire_live, LiveDevice, RayConfig};
use rbc_core::seed;
use rbc_core::sigproc::{critical_features, CriticalFeatureVector, PeakConfig};
use rbc_core::{RbcError, Result};

/// Where origins are drawn, relative to each device's empty point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingBox {
    /// Plunger offsets from the empty point (mV).
    pub below_mv: f64,
    pub above_mv: f64,
    pub vb_min: f64,
    pub vb_max: f64,
    /// Draws per class before giving up on a device.
    pub max_tries: usize,
}

impl Default for SamplingBox {
    fn default() -> Self {
        Self { below_mv: 50.0, above_mv: 200.0, vb_min: -100.0, vb_max: 150.0, max_tries: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub n_devices: usize,
    pub per_device: usize,
    pub ray: RayConfig,
    pub weight: WeightFn,
    pub seed: u64,
    pub ranges: ParamRanges,
    pub peaks: PeakConfig,
    pub sampling: SamplingBox,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_devices: 20,
            per_device: 1350,
            ray: RayConfig::default(),
            weight: WeightFn::Inv,
            seed: 0,
            ranges: ParamRanges::default(),
            peaks: PeakConfig::default(),
            sampling: SamplingBox::default(),
        }
    }
}

/// A labeled critical-feature vector, before any weight is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub features: CriticalFeatureVector,
    pub label: DeviceState,
    pub device_seed: u64,
    pub origin_mv: [f64; 3],
}

/// Voltage at which both dots are empty, recovered from the offsets at `V_B = 0`.
fn empty_point(p: &DeviceParams) -> [f64; 2] {
    let h = p.pinch_offs(0.0);
    // pinch_offs solves for n = 1/2; step back to n = 0 along the same lever
    let [[a, b, _], [d, e, _]] = p.lever;
    let det = a * e - b * d;
    [h[0] - 0.5 * (e - b) / det, h[1] - 0.5 * (a - d) / det]
}

fn device_features(spec: &DatasetSpec, device: usize) -> Result<Vec<FeatureRecord>> {
    let device_seed = seed::derive(spec.seed, "device", device as u64);
    let params = make_device(device_seed, &spec.ranges)?;
    let empty = empty_point(&params);
    let mut origins = seed::rng(spec.seed, "origins", device as u64);
    let mut live = LiveDevice::new(params.clone(), spec.ray.px_mv, seed::derive(spec.seed, "noise", device as u64));
    let sb = &spec.sampling;

    let mut out = Vec::with_capacity(spec.per_device);
    for (c, state) in DeviceState::ALL.into_iter().enumerate() {
        let quota = spec.per_device / DeviceState::COUNT + usize::from(c < spec.per_device % DeviceState::COUNT);
        let mut tries = 0;
        let mut got = 0;
        while got < quota {
            tries += 1;
            if tries > sb.max_tries {
                return Err(RbcError::Contract(format!(
                    "device {device} (seed {device_seed}): no {state} point after {} draws",
                    sb.max_tries
                )));
            }
            let v = [
                origins.random_range(empty[0] - sb.below_mv..=empty[0] + sb.above_mv),
                origins.random_range(empty[1] - sb.below_mv..=empty[1] + sb.above_mv),
                origins.random_range(sb.vb_min..=sb.vb_max),
            ];
            if params.label_state(v) != state {
                continue;
            }
            let proj = acquire_live(&mut live, v, &spec.ray)?;
            out.push(FeatureRecord {
                features: critical_features(&proj, &spec.peaks),
                label: state,
                device_seed,
                origin_mv: v,
            });
            got += 1;
        }
    }
    Ok(out)
}

/// Critical features for every device, in device order.
pub fn gen_features(spec: &DatasetSpec) -> Result<Vec<FeatureRecord>> {
    if spec.n_devices == 0 {
        return Err(RbcError::Config("need at least one device".into()));
    }
    spec.ray.validate()?;
    spec.peaks.validate()?;
    let per_device: Vec<Vec<FeatureRecord>> =
        (0..spec.n_devices).into_par_iter().map(|d| device_features(spec, d)).collect::<Result<_>>()?;
    Ok(per_device.into_iter().flatten().collect())
}

/// Applies `weight` to feature records.
pub fn weigh(features: &[FeatureRecord], ray: &RayConfig, weight: WeightFn) -> Result<Vec<FingerprintRecord>> {
    features
        .iter()
        .map(|f| {
            let fp = apply_weight(&f.features, weight, ray.l_px)?;
            Ok(FingerprintRecord {
                m: ray.m,
                l_px: ray.l_px,
                px_mv: ray.px_mv,
                weight_id: weight,
                values: fp.values,
                label: f.label.index(),
                device_seed: f.device_seed,
                origin_mv: f.origin_mv,
            })
        })
        .collect()
}

pub fn gen_dataset(spec: &DatasetSpec) -> Result<Vec<FingerprintRecord>> {
    weigh(&gen_features(spec)?, &spec.ray, spec.weight)
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[FingerprintRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<FingerprintRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn save_dataset(path: &Path, records: &[FingerprintRecord]) -> Result<()> {
    crate::io::write_atomic(path, |w| write_jsonl(w, records))
}

pub fn load_dataset(path: &Path) -> Result<Vec<FingerprintRecord>> {
    read_jsonl(crate::io::open(path)?)
}

/// Per-class counts of a dataset.
pub fn class_histogram(records: &[FingerprintRecord]) -> [usize; DeviceState::COUNT] {
    let mut h = [0; DeviceState::COUNT];
    for r in records {
        h[r.label] += 1;
    }
    h
}
