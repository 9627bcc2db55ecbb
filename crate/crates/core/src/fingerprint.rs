//! Point fingerprints: critical-feature distances mapped into `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{RbcError, Result};
use crate::sigproc::CriticalFeatureVector;

/// Weight function applied to each critical-feature distance `x` (pixels).
///
/// `x_hat` is the min-max normalization over the features of one projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WeightFn {
    /// `1 / x`
    Inv,
    /// `exp(-x)`
    ExpNeg,
    /// `1 - x_hat`
    OneMinusHat,
    /// `x_hat`
    Hat,
    /// `x / L_px`
    Raw,
    /// `1 / (1 + x_hat)`
    InvHat,
    /// `exp(-x_hat)`
    ExpNegHat,
}

/// Catalogue entry describing a weight function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightInfo {
    pub weight: WeightFn,
    pub decreasing: bool,
    pub normalized: bool,
    /// Relative change of the weight between neighbouring pixels at `x = 1`.
    pub decay: &'static str,
}

impl WeightFn {
    pub const ALL: [WeightFn; 7] = [
        WeightFn::Inv,
        WeightFn::ExpNeg,
        WeightFn::OneMinusHat,
        WeightFn::Hat,
        WeightFn::Raw,
        WeightFn::InvHat,
        WeightFn::ExpNegHat,
    ];

    pub fn id(self) -> &'static str {
        match self {
            WeightFn::Inv => "INV",
            WeightFn::ExpNeg => "EXP_NEG",
            WeightFn::OneMinusHat => "ONE_MINUS_HAT",
            WeightFn::Hat => "HAT",
            WeightFn::Raw => "RAW",
            WeightFn::InvHat => "INV_HAT",
            WeightFn::ExpNegHat => "EXP_NEG_HAT",
        }
    }

    pub fn uses_min_max(self) -> bool {
        matches!(self, WeightFn::OneMinusHat | WeightFn::Hat | WeightFn::InvHat | WeightFn::ExpNegHat)
    }

    /// Weight of a single feature given the projection's feature range.
    fn eval(self, x: f64, min: f64, max: f64, l_px: f64) -> f64 {
        let hat = if max > min { (x - min) / (max - min) } else { 0.0 };
        match self {
            WeightFn::Inv => 1.0 / x,
            WeightFn::ExpNeg => (-x).exp(),
            WeightFn::OneMinusHat => 1.0 - hat,
            WeightFn::Hat => hat,
            WeightFn::Raw => x / l_px,
            WeightFn::InvHat => 1.0 / (1.0 + hat),
            WeightFn::ExpNegHat => (-hat).exp(),
        }
    }
}

impl std::fmt::Display for WeightFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for WeightFn {
    type Err = RbcError;

    fn from_str(s: &str) -> Result<Self> {
        WeightFn::ALL
            .into_iter()
            .find(|w| w.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| RbcError::Config(format!("unknown weight function `{s}`")))
    }
}

/// Every weight function available to sweeps.
pub fn catalogue() -> Vec<WeightInfo> {
    use WeightFn::*;
    let info = |weight, decreasing, decay| WeightInfo { weight, decreasing, normalized: WeightFn::uses_min_max(weight), decay };
    vec![
        info(Inv, true, "power law, 1/x"),
        info(ExpNeg, true, "exponential in pixels"),
        info(OneMinusHat, true, "linear over the feature range"),
        info(Hat, false, "linear over the feature range"),
        info(Raw, false, "linear in pixels"),
        info(InvHat, true, "1/(1+t) over the feature range"),
        info(ExpNegHat, true, "exponential over the feature range"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub values: Vec<f64>,
    pub weight: WeightFn,
    pub l_px: usize,
}

impl Fingerprint {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One labeled line of a fingerprint dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintRecord {
    pub m: usize,
    pub l_px: usize,
    pub px_mv: f64,
    pub weight_id: WeightFn,
    pub values: Vec<f64>,
    /// Index into `[ND, SD_L, SD_C, SD_R, DD]`.
    pub label: usize,
    pub device_seed: u64,
    pub origin_mv: [f64; 3],
}

/// Applies `weight` to every feature; rays without a feature map to 0.
pub fn apply_weight(cfv: &CriticalFeatureVector, weight: WeightFn, l_px: usize) -> Result<Fingerprint> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for x in cfv.values.iter().flatten() {
        if *x == 0 || *x as usize > l_px {
            return Err(RbcError::Contract(format!("feature {x} outside [1, {l_px}]")));
        }
        min = min.min(f64::from(*x));
        max = max.max(f64::from(*x));
    }
    let values = cfv
        .values
        .iter()
        .map(|x| match x {
            Some(x) => weight.eval(f64::from(*x), min, max, l_px as f64),
            None => 0.0,
        })
        .collect();
    Ok(Fingerprint { values, weight, l_px })
}
