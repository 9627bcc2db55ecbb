//! M-projections: evenly spaced rays around a point in plunger space.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{RbcError, Result};
use crate::qdsim::{DeviceParams, Gate, StabilityDiagram, Window};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayConfig {
    pub m: usize,
    pub l_px: usize,
    pub px_mv: f64,
}

impl Default for RayConfig {
    fn default() -> Self {
        Self { m: 6, l_px: 60, px_mv: 0.5 }
    }
}

impl RayConfig {
    pub fn new(m: usize, l_px: usize, px_mv: f64) -> Result<Self> {
        let cfg = Self { m, l_px, px_mv };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return Err(RbcError::Config(format!("need at least 3 rays, got {}", self.m)));
        }
        if self.l_px < 8 {
            return Err(RbcError::Config(format!("rays need at least 8 pixels, got {}", self.l_px)));
        }
        if !(self.px_mv > 0.0) {
            return Err(RbcError::Config("pixel size must be > 0".into()));
        }
        Ok(())
    }

    /// Ray length in mV.
    pub fn length_mv(&self) -> f64 {
        self.l_px as f64 * self.px_mv
    }

    pub fn total_pixels(&self) -> usize {
        self.m * self.l_px
    }
}

/// Unit vectors at angles `2 pi k / m` in the `(V_P1, V_P2)` plane, first along `+V_P1`.
pub fn directions(m: usize) -> Result<Vec<[f64; 2]>> {
    if m < 3 {
        return Err(RbcError::Config(format!("need at least 3 rays, got {m}")));
    }
    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    Ok((0..m)
        .map(|k| {
            let a = TAU * k as f64 / m as f64;
            [snap(a.cos()), snap(a.sin())]
        })
        .collect())
}

/// Point visited by pixel `i` (0-based) of a ray; pixel `i` sits `(i + 1) * px_mv` from the origin.
pub fn ray_point(origin: Gate, dir: [f64; 2], i: usize, px_mv: f64) -> Gate {
    let d = (i + 1) as f64 * px_mv;
    [origin[0] + d * dir[0], origin[1] + d * dir[1], origin[2]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MProjection {
    pub origin: Gate,
    pub config: RayConfig,
    pub directions: Vec<[f64; 2]>,
    /// `samples[k][i]` is pixel `i` of ray `k`.
    pub samples: Vec<Vec<f64>>,
}

impl MProjection {
    pub fn from_samples(origin: Gate, config: RayConfig, samples: Vec<Vec<f64>>) -> Result<Self> {
        config.validate()?;
        if samples.len() != config.m {
            return Err(RbcError::Dimension { expected: config.m, got: samples.len() });
        }
        for ray in &samples {
            if ray.len() != config.l_px {
                return Err(RbcError::Dimension { expected: config.l_px, got: ray.len() });
            }
            if ray.iter().any(|x| !x.is_finite()) {
                return Err(RbcError::Contract("projection samples must be finite".into()));
            }
        }
        Ok(Self { origin, config, directions: directions(config.m)?, samples })
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().flatten().copied()
    }
}

/// File form of an [`MProjection`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFile {
    pub origin_mv: [f64; 2],
    pub vb_mv: f64,
    pub m: usize,
    pub l_px: usize,
    pub px_mv: f64,
    pub samples: Vec<Vec<f64>>,
}

impl From<&MProjection> for ProjectionFile {
    fn from(p: &MProjection) -> Self {
        Self {
            origin_mv: [p.origin[0], p.origin[1]],
            vb_mv: p.origin[2],
            m: p.config.m,
            l_px: p.config.l_px,
            px_mv: p.config.px_mv,
            samples: p.samples.clone(),
        }
    }
}

impl TryFrom<ProjectionFile> for MProjection {
    type Error = RbcError;

    fn try_from(f: ProjectionFile) -> Result<Self> {
        let origin = [f.origin_mv[0], f.origin_mv[1], f.vb_mv];
        MProjection::from_samples(origin, RayConfig { m: f.m, l_px: f.l_px, px_mv: f.px_mv }, f.samples)
    }
}

/// Anything that can report a sensor value at a gate voltage.
///
/// Takes `&mut self` because a physical instrument can only sit at one
/// voltage at a time.
pub trait Sampler {
    fn sample(&mut self, v: Gate) -> f64;

    /// Plunger window the sampler accepts; `None` means unbounded.
    fn domain(&self) -> Option<Window> {
        None
    }
}

/// Live access to a simulated device with fresh noise on every call.
pub struct LiveDevice {
    pub params: DeviceParams,
    pub resolution: f64,
    pub domain: Option<Window>,
    rng: ChaCha8Rng,
}

impl LiveDevice {
    pub fn new(params: DeviceParams, resolution: f64, noise_seed: u64) -> Self {
        Self { params, resolution, domain: None, rng: seed::rng(noise_seed, "live", 0) }
    }

    pub fn with_domain(mut self, domain: Window) -> Self {
        self.domain = Some(domain);
        self
    }
}

impl Sampler for LiveDevice {
    fn sample(&mut self, v: Gate) -> f64 {
        let clean = self.params.sensor_signal(v, self.resolution);
        if self.params.noise_sigma > 0.0 {
            let z: f64 = self.rng.sample(StandardNormal);
            clean + self.params.noise_sigma * z
        } else {
            clean
        }
    }

    fn domain(&self) -> Option<Window> {
        self.domain
    }
}

impl<F: FnMut(Gate) -> f64> Sampler for F {
    fn sample(&mut self, v: Gate) -> f64 {
        self(v)
    }
}

fn check_domain(domain: &Window, origin: Gate, dirs: &[[f64; 2]], cfg: &RayConfig) -> Result<()> {
    // the window is convex, so the ray end points decide
    for (k, &dir) in dirs.iter().enumerate() {
        let end = ray_point(origin, dir, cfg.l_px - 1, cfg.px_mv);
        let tol = 1e-9;
        let inside = end[0] >= domain.v1_min - tol
            && end[0] <= domain.v1_max + tol
            && end[1] >= domain.v2_min - tol
            && end[1] <= domain.v2_max + tol;
        if !inside || !origin[0].is_finite() || !origin[1].is_finite() {
            return Err(RbcError::OutOfRange { ray: k, point_mv: [end[0], end[1]] });
        }
    }
    Ok(())
}

/// Measures every ray through `sampler`, pixel by pixel.
pub fn acquire_live<S: Sampler + ?Sized>(sampler: &mut S, origin: Gate, config: &RayConfig) -> Result<MProjection> {
    config.validate()?;
    let dirs = directions(config.m)?;
    if let Some(domain) = sampler.domain() {
        check_domain(&domain, origin, &dirs, config)?;
    }
    let samples = dirs
        .iter()
        .map(|&dir| {
            (0..config.l_px)
                .map(|i| sampler.sample(ray_point(origin, dir, i, config.px_mv)))
                .collect()
        })
        .collect();
    MProjection::from_samples(origin, *config, samples)
}

fn grid_coord(x: f64, x0: f64, res: f64, n: usize) -> Option<(usize, f64)> {
    let mut f = (x - x0) / res;
    if (f - f.round()).abs() < 1e-9 {
        f = f.round();
    }
    let last = (n - 1) as f64;
    if !(0.0..=last).contains(&f) {
        return None;
    }
    let i = (f.floor() as usize).min(n.saturating_sub(2));
    Some((i, f - i as f64))
}

/// Bilinear interpolation of the diagram signal; `None` outside the grid.
pub fn bilinear(diagram: &StabilityDiagram, v1: f64, v2: f64) -> Option<f64> {
    let (nx, ny) = (diagram.nx(), diagram.ny());
    if nx < 2 || ny < 2 {
        return None;
    }
    let (i, tx) = grid_coord(v1, diagram.v1_axis[0], diagram.resolution, nx)?;
    let (j, ty) = grid_coord(v2, diagram.v2_axis[0], diagram.resolution, ny)?;
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else if t == 1.0 { b } else { a + t * (b - a) };
    let bottom = lerp(diagram.at(i, j), diagram.at(i + 1, j), tx);
    let top = lerp(diagram.at(i, j + 1), diagram.at(i + 1, j + 1), tx);
    Some(lerp(bottom, top, ty))
}

/// Builds a projection by interpolating a pre-measured scan at the points a live scan would visit.
pub fn acquire_offline(diagram: &StabilityDiagram, origin: Gate, config: &RayConfig) -> Result<MProjection> {
    config.validate()?;
    let dirs = directions(config.m)?;
    let mut samples = Vec::with_capacity(config.m);
    for (k, &dir) in dirs.iter().enumerate() {
        let mut ray = Vec::with_capacity(config.l_px);
        for i in 0..config.l_px {
            let p = ray_point(origin, dir, i, config.px_mv);
            let value = bilinear(diagram, p[0], p[1]).ok_or(RbcError::OutOfRange { ray: k, point_mv: [p[0], p[1]] })?;
            ray.push(value);
        }
        samples.push(ray);
    }
    MProjection::from_samples(origin, *config, samples)
}
