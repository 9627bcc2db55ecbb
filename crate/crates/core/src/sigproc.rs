//! Noise estimation, peak picking and the pre-classification quality gate.
//!
//! All thresholds are relative to the median and the MAD-based noise level
//! of the whole projection, so they follow the signal under offsets and
//! positive rescaling.

use serde::{Deserialize, Serialize};

use crate::error::{RbcError, Result};
use crate::rayscan::MProjection;

/// Consistency constant turning a MAD into a Gaussian standard deviation.
pub const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    pub height_k: f64,
    pub prom_k: f64,
    pub min_separation_px: usize,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self { height_k: 3.0, prom_k: 2.0, min_separation_px: 3 }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.height_k > 0.0 && self.prom_k > 0.0) {
            return Err(RbcError::Config("peak threshold multipliers must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub snr_min: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self { snr_min: 4.0 }
    }
}

/// Median and robust noise level of a sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseStats {
    pub median: f64,
    pub sigma: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty set");
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn robust_stats(values: &[f64]) -> NoiseStats {
    let mut v = values.to_vec();
    let med = median(&mut v);
    for x in v.iter_mut() {
        *x = (*x - med).abs();
    }
    NoiseStats { median: med, sigma: MAD_TO_SIGMA * median(&mut v) }
}

/// Pooled statistics over all `M * L_px` samples of a projection.
pub fn projection_stats(proj: &MProjection) -> NoiseStats {
    robust_stats(&proj.values().collect::<Vec<_>>())
}

/// Robust noise level `1.4826 * MAD` over the whole projection.
pub fn noise_level(proj: &MProjection) -> f64 {
    projection_stats(proj).sigma
}

/// Topographic prominence of the sample at `i`.
pub fn prominence(ray: &[f64], i: usize) -> f64 {
    let h = ray[i];
    let mut left_min = h;
    for &x in ray[..i].iter().rev() {
        if x > h {
            break;
        }
        left_min = left_min.min(x);
    }
    let mut right_min = h;
    for &x in &ray[i + 1..] {
        if x > h {
            break;
        }
        right_min = right_min.min(x);
    }
    h - left_min.max(right_min)
}

/// Interior local maxima as 0-based indices.
///
/// A flat top counts once, at its first sample, when both outer neighbours
/// are strictly lower.
fn local_maxima(ray: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = ray.len();
    let mut i = 1;
    while i + 1 < n {
        if ray[i] > ray[i - 1] {
            let mut j = i;
            while j + 1 < n && ray[j + 1] == ray[i] {
                j += 1;
            }
            if j + 1 < n && ray[j + 1] < ray[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Peaks on one ray, as 1-based distances from the origin in ascending order.
pub fn find_peaks(ray: &[f64], sigma: f64, median: f64, cfg: &PeakConfig) -> Vec<usize> {
    let min_height = median + cfg.height_k * sigma;
    let min_prom = cfg.prom_k * sigma;
    let mut peaks: Vec<usize> = local_maxima(ray)
        .into_iter()
        .filter(|&i| ray[i] >= min_height && prominence(ray, i) >= min_prom)
        .collect();

    if cfg.min_separation_px > 1 && peaks.len() > 1 {
        // greedy: highest first, smaller index wins ties
        let mut order = peaks.clone();
        order.sort_by(|&a, &b| ray[b].total_cmp(&ray[a]).then(a.cmp(&b)));
        let mut kept: Vec<usize> = Vec::with_capacity(order.len());
        for i in order {
            if kept.iter().all(|&k| k.abs_diff(i) >= cfg.min_separation_px) {
                kept.push(i);
            }
        }
        kept.sort_unstable();
        peaks = kept;
    }
    peaks.into_iter().map(|i| i + 1).collect()
}

/// Per-ray distance (in pixels) to the nearest detected transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalFeatureVector {
    /// `None` marks a ray without any detected feature.
    pub values: Vec<Option<u32>>,
}

impl CriticalFeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn critical_features(proj: &MProjection, cfg: &PeakConfig) -> CriticalFeatureVector {
    let stats = projection_stats(proj);
    let values = proj
        .samples
        .iter()
        .map(|ray| find_peaks(ray, stats.sigma, stats.median, cfg).first().map(|&x| x as u32))
        .collect();
    CriticalFeatureVector { values }
}

/// Whether the projection carries enough charge-sensing contrast to classify.
pub fn quality_check(proj: &MProjection, cfg: &QualityConfig) -> bool {
    let stats = projection_stats(proj);
    let max = proj.values().fold(f64::NEG_INFINITY, f64::max);
    let excess = max - stats.median;
    if stats.sigma == 0.0 {
        return excess > 0.0;
    }
    excess / stats.sigma >= cfg.snr_min
}
