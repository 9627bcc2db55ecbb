//! Constant-interaction double-quantum-dot simulator.
//!
//! A device maps gate voltages `(V_P1, V_P2, V_B)` to induced charges through a
//! lever-arm matrix. The ground-state occupation minimizes the
//! constant-interaction energy over non-negative integers, and the sensor
//! reports a central difference along `V_P1` of a thermally averaged charge.
//! Above the barrier merge point the two dots act as one central dot.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{RbcError, Result};
use crate::seed;

/// Gate vector `(V_P1, V_P2, V_B)` in mV.
pub type Gate = [f64; 3];

/// Charge configuration of the double dot, in the probability-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum DeviceState {
    #[serde(rename = "ND")]
    Nd = 0,
    #[serde(rename = "SD_L")]
    SdL = 1,
    #[serde(rename = "SD_C")]
    SdC = 2,
    #[serde(rename = "SD_R")]
    SdR = 3,
    #[serde(rename = "DD")]
    Dd = 4,
}

impl DeviceState {
    pub const ALL: [DeviceState; 5] = [
        DeviceState::Nd,
        DeviceState::SdL,
        DeviceState::SdC,
        DeviceState::SdR,
        DeviceState::Dd,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DeviceState::Nd => "ND",
            DeviceState::SdL => "SD_L",
            DeviceState::SdC => "SD_C",
            DeviceState::SdR => "SD_R",
            DeviceState::Dd => "DD",
        }
    }
}

impl std::fmt::Display for DeviceState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Ground-state charge configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occupancy {
    pub n1: u32,
    pub n2: u32,
    pub merged: bool,
}

impl Occupancy {
    pub fn state(&self) -> DeviceState {
        match (self.merged, self.n1, self.n2) {
            (true, 0, _) => DeviceState::Nd,
            (true, _, _) => DeviceState::SdC,
            (false, 0, 0) => DeviceState::Nd,
            (false, _, 0) => DeviceState::SdL,
            (false, 0, _) => DeviceState::SdR,
            (false, _, _) => DeviceState::Dd,
        }
    }
}

/// Parameters of one simulated device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Charging energies of the left and right dot (mV).
    pub e1: f64,
    pub e2: f64,
    /// Inter-dot coupling energy (mV).
    pub em: f64,
    /// Rows map `(V_P1, V_P2, V_B)` to induced charge on dot 1 and dot 2 (1/mV).
    pub lever: [[f64; 3]; 2],
    pub offsets: [f64; 2],
    pub beta1: f64,
    pub beta2: f64,
    /// Thermal broadening (mV).
    pub tb: f64,
    pub merge_mid: f64,
    pub merge_width: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Closed interval used by [`ParamRanges`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.max == self.min {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(RbcError::Config(format!(
                "range `{name}` is invalid: [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Randomization table for [`make_device`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamRanges {
    pub e1: Range,
    pub e2: Range,
    /// `Em / sqrt(E1 E2)`; must stay in `[0, 1)`.
    pub em_frac: Range,
    /// Transition period of each dot along its own plunger (mV).
    pub period: Range,
    /// Cross-coupling as a fraction of the direct lever arm.
    pub cross: Range,
    /// Barrier lever arm (1/mV), shared by both dots.
    pub barrier_lever: Range,
    /// Plunger voltages at which both dots hold zero induced charge with `V_B = 0` (mV).
    pub empty_point: Range,
    pub beta1: Range,
    /// `beta2 / beta1`; must stay in `(0, 1)`.
    pub beta_ratio: Range,
    pub tb: Range,
    pub merge_mid: Range,
    pub merge_width: Range,
    /// Noise std as a fraction of the dot-1 ridge height.
    pub noise_frac: Range,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            e1: Range::new(40.0, 60.0),
            e2: Range::new(40.0, 60.0),
            em_frac: Range::new(0.15, 0.35),
            period: Range::new(12.0, 16.0),
            cross: Range::new(0.2, 0.35),
            barrier_lever: Range::new(0.002, 0.005),
            empty_point: Range::new(25.0, 55.0),
            beta1: Range::new(0.8, 1.0),
            beta_ratio: Range::new(0.4, 0.5),
            tb: Range::new(1.3, 1.7),
            merge_mid: Range::new(60.0, 90.0),
            merge_width: Range::new(5.0, 15.0),
            noise_frac: Range::new(0.02, 0.05),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("e1", self.e1),
            ("e2", self.e2),
            ("em_frac", self.em_frac),
            ("period", self.period),
            ("cross", self.cross),
            ("barrier_lever", self.barrier_lever),
            ("empty_point", self.empty_point),
            ("beta1", self.beta1),
            ("beta_ratio", self.beta_ratio),
            ("tb", self.tb),
            ("merge_mid", self.merge_mid),
            ("merge_width", self.merge_width),
            ("noise_frac", self.noise_frac),
        ];
        for (name, r) in named {
            r.check(name)?;
        }
        let bad = |what: &str| Err(RbcError::Config(format!("range violates device invariant: {what}")));
        if self.e1.min <= 0.0 || self.e2.min <= 0.0 {
            return bad("charging energies must be > 0");
        }
        if self.em_frac.min < 0.0 || self.em_frac.max >= 1.0 {
            return bad("em_frac must lie in [0, 1)");
        }
        if self.period.min <= 0.0 {
            return bad("period must be > 0");
        }
        if self.beta1.min <= 0.0 || self.beta1.max > 1.0 {
            return bad("beta1 must lie in (0, 1]");
        }
        if self.beta_ratio.min <= 0.0 || self.beta_ratio.max >= 1.0 {
            return bad("beta_ratio must lie in (0, 1)");
        }
        if self.tb.min <= 0.0 {
            return bad("tb must be > 0");
        }
        if self.merge_width.min <= 0.0 {
            return bad("merge_width must be > 0");
        }
        if self.noise_frac.min < 0.0 {
            return bad("noise_frac must be >= 0");
        }
        Ok(())
    }
}

/// Draws a device from `ranges`; the same seed always yields the same device.
pub fn make_device(seed: u64, ranges: &ParamRanges) -> Result<DeviceParams> {
    ranges.validate()?;
    let mut rng = seed::rng(seed, "device", 0);
    let e1 = ranges.e1.sample(&mut rng);
    let e2 = ranges.e2.sample(&mut rng);
    let em = ranges.em_frac.sample(&mut rng) * (e1 * e2).sqrt();
    let l11 = 1.0 / ranges.period.sample(&mut rng);
    let l22 = 1.0 / ranges.period.sample(&mut rng);
    let l12 = ranges.cross.sample(&mut rng) * l11;
    let l21 = ranges.cross.sample(&mut rng) * l22;
    let lb = ranges.barrier_lever.sample(&mut rng);
    let empty = [ranges.empty_point.sample(&mut rng), ranges.empty_point.sample(&mut rng)];
    let beta1 = ranges.beta1.sample(&mut rng);
    let beta2 = ranges.beta_ratio.sample(&mut rng) * beta1;
    let tb = ranges.tb.sample(&mut rng);
    let merge_mid = ranges.merge_mid.sample(&mut rng);
    let merge_width = ranges.merge_width.sample(&mut rng);
    let noise_frac = ranges.noise_frac.sample(&mut rng);

    let lever = [[l11, l12, lb], [l21, l22, lb]];
    let offsets = [
        l11 * empty[0] + l12 * empty[1],
        l21 * empty[0] + l22 * empty[1],
    ];
    let mut params = DeviceParams {
        e1,
        e2,
        em,
        lever,
        offsets,
        beta1,
        beta2,
        tb,
        merge_mid,
        merge_width,
        noise_sigma: 0.0,
        seed,
    };
    params.noise_sigma = noise_frac * params.ridge_height();
    params.validate()?;
    Ok(params)
}

const BOLTZMANN_WINDOW: f64 = 5.0;

impl DeviceParams {
    /// Fixed device used by the tuning benchmarks.
    pub fn reference() -> Self {
        let lever = [[0.070, 0.018, 0.004], [0.019, 0.068, 0.004]];
        let empty = [40.0, 40.0];
        let offsets = [
            lever[0][0] * empty[0] + lever[0][1] * empty[1],
            lever[1][0] * empty[0] + lever[1][1] * empty[1],
        ];
        let mut p = Self {
            e1: 50.0,
            e2: 48.0,
            em: 12.0,
            lever,
            offsets,
            beta1: 1.0,
            beta2: 0.45,
            tb: 1.5,
            merge_mid: 115.0,
            merge_width: 10.0,
            noise_sigma: 0.0,
            seed: 0,
        };
        p.noise_sigma = 0.03 * p.ridge_height();
        p
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(RbcError::Config(format!("invalid device: {m}")));
        if !(self.e1 > 0.0 && self.e2 > 0.0) {
            return fail("charging energies must be > 0");
        }
        if !(self.em >= 0.0 && self.em < (self.e1 * self.e2).sqrt()) {
            return fail("need 0 <= Em < sqrt(E1 E2)");
        }
        if !(self.beta2 > 0.0 && self.beta2 < self.beta1 && self.beta1 <= 1.0) {
            return fail("need 0 < beta2 < beta1 <= 1");
        }
        if !(self.tb > 0.0) || !(self.noise_sigma >= 0.0) {
            return fail("need Tb > 0 and noise_sigma >= 0");
        }
        if !(self.merge_width > 0.0) {
            return fail("merge_width must be > 0");
        }
        Ok(())
    }

    /// Peak differential signal of an isolated dot-1 transition.
    pub fn ridge_height(&self) -> f64 {
        self.beta1 * self.e1 * self.lever[0][0] / (4.0 * self.tb)
    }

    pub fn induced(&self, v: Gate) -> [f64; 2] {
        let row = |r: &[f64; 3], o: f64| r[0] * v[0] + r[1] * v[1] + r[2] * v[2] - o;
        [row(&self.lever[0], self.offsets[0]), row(&self.lever[1], self.offsets[1])]
    }

    pub fn is_merged(&self, vb: f64) -> bool {
        sigmoid((vb - self.merge_mid) / self.merge_width) > 0.5
    }

    /// Constant-interaction energy of `(n1, n2)` electrons at induced charge `n`.
    pub fn energy(&self, n: [f64; 2], n1: u32, n2: u32) -> f64 {
        let d1 = f64::from(n1) - n[0];
        let d2 = f64::from(n2) - n[1];
        0.5 * self.e1 * d1 * d1 + 0.5 * self.e2 * d2 * d2 + self.em * d1 * d2
    }

    fn merged_energy(&self, total: f64, n: u32) -> f64 {
        let d = f64::from(n) - total;
        0.5 * self.e1 * d * d
    }

    pub fn occupancy(&self, v: Gate) -> Occupancy {
        let n = self.induced(v);
        if self.is_merged(v[2]) {
            let total = n[0] + n[1];
            return Occupancy { n1: total.round().max(0.0) as u32, n2: 0, merged: true };
        }
        let (n1, n2) = self.ground_state(n);
        Occupancy { n1, n2, merged: false }
    }

    pub fn label_state(&self, v: Gate) -> DeviceState {
        self.occupancy(v).state()
    }

    /// Integer minimizer of the energy over the non-negative quadrant.
    fn ground_state(&self, n: [f64; 2]) -> (u32, u32) {
        let (x0, _) = self.continuous_minimum(n);
        let lo = (x0.floor() - 3.0).max(0.0) as u32;
        let hi = (x0.ceil() + 3.0).max(0.0) as u32;
        let mut best = (0, 0);
        let mut best_u = f64::INFINITY;
        for n1 in lo..=hi {
            // best n2 for this n1 is a rounding of the 1-D continuous optimum
            let y = n[1] - self.em * (f64::from(n1) - n[0]) / self.e2;
            let f = y.floor().max(0.0) as u32;
            for n2 in [f, f + 1] {
                let u = self.energy(n, n1, n2);
                if u < best_u {
                    best_u = u;
                    best = (n1, n2);
                }
            }
        }
        best
    }

    /// Continuous minimizer of the energy restricted to `x, y >= 0`.
    fn continuous_minimum(&self, n: [f64; 2]) -> (f64, f64) {
        let [a, b] = n;
        if a >= 0.0 && b >= 0.0 {
            return (a, b);
        }
        let u = |x: f64, y: f64| {
            let (d1, d2) = (x - a, y - b);
            0.5 * self.e1 * d1 * d1 + 0.5 * self.e2 * d2 * d2 + self.em * d1 * d2
        };
        let candidates = [
            (0.0, (b + self.em * a / self.e2).max(0.0)),
            ((a + self.em * b / self.e1).max(0.0), 0.0),
            (0.0, 0.0),
        ];
        candidates
            .into_iter()
            .min_by(|p, q| u(p.0, p.1).total_cmp(&u(q.0, q.1)))
            .unwrap()
    }

    /// Thermally averaged sensed charge `beta1 <N1> + beta2 <N2>`.
    ///
    /// Only configurations within `5 Tb` of the ground state contribute. Their
    /// Boltzmann weights are shifted down by the weight at the cutoff so the
    /// average stays continuous as configurations enter the window.
    pub fn sensed_charge(&self, v: Gate) -> f64 {
        let n = self.induced(v);
        let window = BOLTZMANN_WINDOW * self.tb;
        let cutoff = (-BOLTZMANN_WINDOW).exp();
        if self.is_merged(v[2]) {
            let total = n[0] + n[1];
            let g = total.round().max(0.0) as u32;
            let u0 = self.merged_energy(total, g);
            let (mut z, mut acc) = (0.0, 0.0);
            for k in g.saturating_sub(2)..=g + 2 {
                let du = self.merged_energy(total, k) - u0;
                if du < window {
                    let w = (-du / self.tb).exp() - cutoff;
                    z += w;
                    acc += w * f64::from(k);
                }
            }
            return self.beta1 * acc / z;
        }
        let (g1, g2) = self.ground_state(n);
        let u0 = self.energy(n, g1, g2);
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for k1 in g1.saturating_sub(2)..=g1 + 2 {
            for k2 in g2.saturating_sub(2)..=g2 + 2 {
                let du = self.energy(n, k1, k2) - u0;
                if du < window {
                    let w = (-du / self.tb).exp() - cutoff;
                    z += w;
                    m1 += w * f64::from(k1);
                    m2 += w * f64::from(k2);
                }
            }
        }
        (self.beta1 * m1 + self.beta2 * m2) / z
    }

    /// Lock-in style differential signal along `V_P1` with step `resolution / 2`.
    pub fn sensor_signal(&self, v: Gate, resolution: f64) -> f64 {
        let delta = 0.5 * resolution;
        let plus = self.sensed_charge([v[0] + delta, v[1], v[2]]);
        let minus = self.sensed_charge([v[0] - delta, v[1], v[2]]);
        (plus - minus) / (2.0 * delta)
    }

    /// Plunger voltages of the first-electron corner at barrier `vb`.
    ///
    /// Solves `lever * v - offsets = (1/2, 1/2)` in the plunger plane.
    pub fn pinch_offs(&self, vb: f64) -> [f64; 2] {
        let [[a, b, c], [d, e, f]] = self.lever;
        let r1 = 0.5 + self.offsets[0] - c * vb;
        let r2 = 0.5 + self.offsets[1] - f * vb;
        let det = a * e - b * d;
        [(r1 * e - b * r2) / det, (a * r2 - r1 * d) / det]
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Rectangular plunger window in mV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub v1_min: f64,
    pub v1_max: f64,
    pub v2_min: f64,
    pub v2_max: f64,
}

impl Window {
    pub fn square(v1_min: f64, v2_min: f64, side: f64) -> Self {
        Self { v1_min, v1_max: v1_min + side, v2_min, v2_max: v2_min + side }
    }

    pub fn contains(&self, v1: f64, v2: f64) -> bool {
        v1 >= self.v1_min && v1 <= self.v1_max && v2 >= self.v2_min && v2 <= self.v2_max
    }
}

/// One plunger-plane scan at a fixed barrier voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityDiagram {
    pub v1_axis: Vec<f64>,
    pub v2_axis: Vec<f64>,
    pub resolution: f64,
    pub vb: f64,
    /// Row-major: `signal[j * nx + i]` is at `(v1_axis[i], v2_axis[j])`.
    pub signal: Vec<f64>,
    pub labels: Vec<DeviceState>,
    pub device_seed: u64,
    pub noise_seed: u64,
}

impl StabilityDiagram {
    pub fn nx(&self) -> usize {
        self.v1_axis.len()
    }

    pub fn ny(&self) -> usize {
        self.v2_axis.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.signal[j * self.nx() + i]
    }

    pub fn label_at(&self, i: usize, j: usize) -> DeviceState {
        self.labels[j * self.nx() + i]
    }

    /// Region covered by grid nodes.
    pub fn extent(&self) -> Window {
        Window {
            v1_min: self.v1_axis[0],
            v1_max: *self.v1_axis.last().unwrap(),
            v2_min: self.v2_axis[0],
            v2_max: *self.v2_axis.last().unwrap(),
        }
    }

    /// Label of the nearest grid node, or `None` outside the scan.
    pub fn label_near(&self, v1: f64, v2: f64) -> Option<DeviceState> {
        let i = ((v1 - self.v1_axis[0]) / self.resolution).round();
        let j = ((v2 - self.v2_axis[0]) / self.resolution).round();
        if i < 0.0 || j < 0.0 || i as usize >= self.nx() || j as usize >= self.ny() {
            return None;
        }
        Some(self.label_at(i as usize, j as usize))
    }

    pub fn label_fraction(&self, state: DeviceState) -> f64 {
        self.labels.iter().filter(|&&s| s == state).count() as f64 / self.labels.len() as f64
    }
}

fn axis(min: f64, max: f64, resolution: f64) -> Result<Vec<f64>> {
    let steps = (max - min) / resolution;
    if !(max > min) || !(resolution > 0.0) || (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(RbcError::Config(format!(
            "window [{min}, {max}] is not a whole number of {resolution} mV pixels"
        )));
    }
    Ok((0..steps.round() as usize).map(|i| min + i as f64 * resolution).collect())
}

/// Renders a noisy scan of `params` over `window` at barrier `vb`.
pub fn render_diagram(
    params: &DeviceParams,
    window: &Window,
    resolution: f64,
    vb: f64,
    noise_seed: u64,
) -> Result<StabilityDiagram> {
    let v1_axis = axis(window.v1_min, window.v1_max, resolution)?;
    let v2_axis = axis(window.v2_min, window.v2_max, resolution)?;
    let mut rng = seed::rng(noise_seed, "noise", 0);
    let mut signal = Vec::with_capacity(v1_axis.len() * v2_axis.len());
    let mut labels = Vec::with_capacity(signal.capacity());
    for &v2 in &v2_axis {
        for &v1 in &v1_axis {
            let v = [v1, v2, vb];
            let noise: f64 = rng.sample(StandardNormal);
            signal.push(params.sensor_signal(v, resolution) + params.noise_sigma * noise);
            labels.push(params.label_state(v));
        }
    }
    Ok(StabilityDiagram {
        v1_axis,
        v2_axis,
        resolution,
        vb,
        signal,
        labels,
        device_seed: params.seed,
        noise_seed,
    })
}

/// Scans stacked along the barrier axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramStack {
    pub slices: Vec<StabilityDiagram>,
}

impl DiagramStack {
    pub fn new(slices: Vec<StabilityDiagram>) -> Result<Self> {
        if slices.is_empty() {
            return Err(RbcError::Empty("diagram stack"));
        }
        let first = &slices[0];
        for s in &slices[1..] {
            if s.v1_axis != first.v1_axis || s.v2_axis != first.v2_axis || s.resolution != first.resolution {
                return Err(RbcError::Config("stack slices must share axes and resolution".into()));
            }
        }
        check_monotone(&slices.iter().map(|s| s.vb).collect::<Vec<_>>())?;
        Ok(Self { slices })
    }

    pub fn vb_values(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.vb).collect()
    }

    pub fn vb_range(&self) -> (f64, f64) {
        let a = self.slices[0].vb;
        let b = self.slices.last().unwrap().vb;
        (a.min(b), a.max(b))
    }

    /// Slice whose barrier voltage is nearest to `vb` (earlier slice on ties).
    pub fn nearest(&self, vb: f64) -> &StabilityDiagram {
        let mut best = &self.slices[0];
        for s in &self.slices[1..] {
            if (s.vb - vb).abs() < (best.vb - vb).abs() {
                best = s;
            }
        }
        best
    }
}

fn check_monotone(vb: &[f64]) -> Result<()> {
    if vb.is_empty() {
        return Err(RbcError::Empty("barrier voltage list"));
    }
    let inc = vb.windows(2).all(|w| w[1] > w[0]);
    let dec = vb.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) {
        return Err(RbcError::Config("barrier voltages must be strictly monotone".into()));
    }
    Ok(())
}

/// Renders one slice per entry of `vb_list`; slice `k` uses noise seed `noise_seed + k`.
pub fn render_stack(
    params: &DeviceParams,
    window: &Window,
    resolution: f64,
    vb_list: &[f64],
    noise_seed: u64,
) -> Result<DiagramStack> {
    check_monotone(vb_list)?;
    let slices = vb_list
        .iter()
        .enumerate()
        .map(|(k, &vb)| render_diagram(params, window, resolution, vb, noise_seed.wrapping_add(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    DiagramStack::new(slices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(mut p: DeviceParams) -> DeviceParams {
        p.noise_sigma = 0.0;
        p
    }

    /// Decoupled device with a diagonal lever arm and `n = v / 20`.
    fn decoupled() -> DeviceParams {
        DeviceParams {
            e1: 50.0,
            e2: 50.0,
            em: 0.0,
            lever: [[0.05, 0.0, 0.0], [0.0, 0.05, 0.0]],
            offsets: [0.0, 0.0],
            beta1: 1.0,
            beta2: 0.45,
            tb: 1.5,
            merge_mid: 1000.0,
            merge_width: 10.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn make_device_is_deterministic_and_seed_sensitive() {
        let r = ParamRanges::default();
        let a = make_device(7, &r).unwrap();
        assert_eq!(a, make_device(7, &r).unwrap());
        assert_ne!(a, make_device(8, &r).unwrap());
        assert!((40.0..=60.0).contains(&a.e1));
        a.validate().unwrap();
    }

    #[test]
    fn make_device_rejects_bad_ranges() {
        let r = ParamRanges { e1: Range::new(60.0, 40.0), ..Default::default() };
        assert!(matches!(make_device(1, &r), Err(RbcError::Config(_))));
        let r = ParamRanges { em_frac: Range::new(0.5, 1.2), ..Default::default() };
        assert!(make_device(1, &r).is_err());
        let r = ParamRanges { beta_ratio: Range::new(0.5, 1.0), ..Default::default() };
        assert!(make_device(1, &r).is_err());
    }

    #[test]
    fn negative_induced_charge_is_empty() {
        let p = decoupled();
        // n = v / 20 = -0.4
        let occ = p.occupancy([-8.0, -8.0, 0.0]);
        assert_eq!(occ, Occupancy { n1: 0, n2: 0, merged: false });
    }

    #[test]
    fn decoupled_dots_round_independently() {
        let p = decoupled();
        let occ = p.occupancy([20.0, 0.0, 0.0]);
        assert_eq!(occ, Occupancy { n1: 1, n2: 0, merged: false });
    }

    #[test]
    fn label_table() {
        let lab = |n1, n2, merged| Occupancy { n1, n2, merged }.state();
        assert_eq!(lab(0, 0, false), DeviceState::Nd);
        assert_eq!(lab(2, 1, false), DeviceState::Dd);
        assert_eq!(lab(3, 0, true), DeviceState::SdC);
        assert_eq!(lab(0, 0, true), DeviceState::Nd);
        assert_eq!(lab(4, 0, false), DeviceState::SdL);
        assert_eq!(lab(0, 2, false), DeviceState::SdR);
    }

    #[test]
    fn merging_switches_on_above_midpoint() {
        let p = DeviceParams::reference();
        assert!(!p.is_merged(p.merge_mid - 1.0));
        assert!(p.is_merged(p.merge_mid + 1.0));
        let occ = p.occupancy([150.0, 150.0, 150.0]);
        assert!(occ.merged);
        assert_eq!(occ.n2, 0);
        assert_eq!(occ.state(), DeviceState::SdC);
    }

    #[test]
    fn plateau_signal_vanishes() {
        let p = decoupled();
        // n = (1.0, 2.0): nearest transition 0.5 electrons = 10 mV away
        let s = p.sensor_signal([20.0, 40.0, 0.0], 0.5);
        assert!(s.abs() < 1e-6, "{s}");
    }

    #[test]
    fn central_difference_is_odd() {
        let p = decoupled();
        let v = [10.3, 40.0, 0.0];
        let d = 0.25;
        let fwd = (p.sensed_charge([v[0] + d, v[1], v[2]]) - p.sensed_charge([v[0] - d, v[1], v[2]])) / (2.0 * d);
        let rev = (p.sensed_charge([v[0] - d, v[1], v[2]]) - p.sensed_charge([v[0] + d, v[1], v[2]])) / (2.0 * d);
        assert_eq!(fwd, p.sensor_signal(v, 0.5));
        assert_eq!(rev, -fwd);
    }

    #[test]
    fn dot_two_ridges_scale_with_beta_ratio() {
        // dot 2 couples to P1 exactly as dot 1 does, so only beta differs
        let mut p = decoupled();
        p.lever = [[0.05, 0.0, 0.0], [0.05, 0.0, 0.0]];
        p.offsets = [0.0, 0.5];
        // dot-1 lines at v1 = 10, 30; dot-2 line at v1 = 20
        let peak = |lo: f64, hi: f64| {
            (0..=4000)
                .map(|k| lo + (hi - lo) * k as f64 / 4000.0)
                .map(|v1| p.sensor_signal([v1, 0.0, 0.0], 0.5))
                .fold(0.0_f64, f64::max)
        };
        let r1 = peak(5.0, 15.0);
        let r2 = peak(15.0, 25.0);
        let ratio = r1 / r2;
        assert!((ratio - p.beta1 / p.beta2).abs() < 0.02 * ratio, "ratio {ratio}");
    }

    #[test]
    fn reference_ridges_are_resolvable() {
        let p = DeviceParams::reference();
        let pin = p.pinch_offs(0.0);
        // walk along P1 across the first dot-1 line below the dot-2 line
        let peak = (0..400)
            .map(|k| pin[0] - 10.0 + 0.05 * k as f64)
            .map(|v1| p.sensor_signal([v1, pin[1] - 15.0, 0.0], 0.5))
            .fold(0.0_f64, f64::max);
        // cross coupling through Em steepens the line slightly beyond the isolated-dot value
        let h = p.ridge_height();
        assert!(peak > h && peak < 1.15 * h, "{peak} vs {h}");
    }

    #[test]
    fn noiseless_render_is_reproducible() {
        let p = quiet(DeviceParams::reference());
        let w = Window::square(0.0, 0.0, 40.0);
        let a = render_diagram(&p, &w, 0.5, 0.0, 3).unwrap();
        let b = render_diagram(&p, &w, 0.5, 0.0, 99).unwrap();
        assert_eq!(a, StabilityDiagram { noise_seed: 3, ..b });
        assert_eq!(a.nx(), 80);
    }

    #[test]
    fn noisy_render_depends_on_noise_seed_only() {
        let p = DeviceParams::reference();
        let w = Window::square(0.0, 0.0, 10.0);
        let a = render_diagram(&p, &w, 0.5, 0.0, 3).unwrap();
        assert_eq!(a, render_diagram(&p, &w, 0.5, 0.0, 3).unwrap());
        assert_ne!(a.signal, render_diagram(&p, &w, 0.5, 0.0, 4).unwrap().signal);
    }

    #[test]
    fn window_scale() {
        let p = quiet(DeviceParams::reference());
        let w = Window::square(0.0, 0.0, 200.0);
        let v1 = axis(w.v1_min, w.v1_max, 0.5).unwrap();
        assert_eq!(v1.len(), 400);
        assert!(render_diagram(&p, &Window::square(0.0, 0.0, 10.2), 0.5, 0.0, 0).is_err());
        assert!(render_diagram(&p, &Window::square(0.0, 0.0, 10.0), 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn large_window_shows_all_unmerged_states() {
        let p = quiet(DeviceParams::reference());
        let d = render_diagram(&p, &Window::square(-20.0, -20.0, 200.0), 2.0, 0.0, 0).unwrap();
        let mut seen: Vec<_> = d.labels.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen, vec![DeviceState::Nd, DeviceState::SdL, DeviceState::SdR, DeviceState::Dd]);
        for j in 0..d.ny() {
            for i in 0..d.nx() {
                assert_eq!(d.label_at(i, j), p.label_state([d.v1_axis[i], d.v2_axis[j], 0.0]));
            }
        }
    }

    #[test]
    fn stack_rules() {
        let p = quiet(DeviceParams::reference());
        let w = Window::square(-20.0, -20.0, 200.0);
        let vbs = [-100.0, -50.0, 0.0, 50.0, 100.0, 150.0];
        let stack = render_stack(&p, &w, 4.0, &vbs, 5).unwrap();
        assert_eq!(stack.slices.len(), 6);
        let dd: Vec<f64> = stack.slices.iter().map(|s| s.label_fraction(DeviceState::Dd)).collect();
        let sdc: Vec<f64> = stack.slices.iter().map(|s| s.label_fraction(DeviceState::SdC)).collect();
        assert!(dd[0] > dd[5]);
        assert!(sdc.windows(2).all(|w| w[1] >= w[0]), "{sdc:?}");

        let single = render_stack(&p, &w, 4.0, &[50.0], 5).unwrap();
        assert_eq!(single.slices[0], render_diagram(&p, &w, 4.0, 50.0, 5).unwrap());

        assert!(render_stack(&p, &w, 4.0, &[], 5).is_err());
        assert!(render_stack(&p, &w, 4.0, &[0.0, 0.0], 5).is_err());
        assert_eq!(stack.nearest(120.0).vb, 100.0);
        assert_eq!(stack.nearest(-1000.0).vb, -100.0);
    }

    #[test]
    fn decoupled_lines_are_axis_parallel() {
        let p = decoupled();
        // transitions of dot 1 sit at v1 = 10, 30, 50 for any v2
        for v2 in [0.0, 17.0, 33.0, 61.0] {
            for &line in &[10.0, 30.0, 50.0] {
                let below = p.occupancy([line - 0.01, v2, 0.0]).n1;
                let above = p.occupancy([line + 0.01, v2, 0.0]).n1;
                assert_eq!(above, below + 1);
            }
        }
    }

    #[test]
    fn interdot_boundary_orientation() {
        let p = quiet(DeviceParams::reference());
        // locate the (1,0) <-> (0,1) boundary along rows of constant v2
        let mut pts = vec![];
        let mut v2 = 0.0;
        while v2 < 120.0 {
            let mut prev = p.occupancy([0.0, v2, 0.0]);
            let mut v1 = 0.0;
            while v1 < 120.0 {
                let occ = p.occupancy([v1, v2, 0.0]);
                if (prev.n1, prev.n2) == (0, 1) && (occ.n1, occ.n2) == (1, 0) {
                    pts.push((v1, v2));
                }
                prev = occ;
                v1 += 0.05;
            }
            v2 += 0.05;
        }
        assert!(pts.len() > 10, "no inter-dot segment found");
        let (x0, y0) = pts[0];
        let (x1, y1) = *pts.last().unwrap();
        let slope = (y1 - y0) / (x1 - x0);
        // the inter-dot segment runs along the detuning-orthogonal diagonal
        assert!(slope > 0.0, "slope {slope}");
        // while single-dot lines tilt negative through cross coupling
        let first_line_v1 = |v2: f64| {
            (0..4000).map(|k| k as f64 * 0.05).find(|&v1| p.occupancy([v1, v2, 0.0]).n1 == 1).unwrap()
        };
        assert!(first_line_v1(0.0) > first_line_v1(10.0));
    }
}
