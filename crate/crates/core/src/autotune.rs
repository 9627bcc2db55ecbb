//! Classifier-in-the-loop tuning: a fitness over gate space minimized with Nelder-Mead.
//!
//! Every objective evaluation measures an M-projection at the candidate
//! point, classifies it, and scores the distance of the resulting
//! probability vector from the target state plus a small penalty that
//! prefers low plunger voltages.

use serde::{Deserialize, Serialize};

use crate::classifier::{MlpModel, ProbabilityVector};
use crate::error::{RbcError, Result};
use crate::fingerprint::{apply_weight, Fingerprint, WeightFn};
use crate::qdsim::{DeviceState, DiagramStack, StabilityDiagram, Window};
use crate::rayscan::{acquire_live, acquire_offline, MProjection, RayConfig, Sampler};
use crate::sigproc::{critical_features, quality_check, PeakConfig, QualityConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessConfig {
    pub p_target: ProbabilityVector,
    /// Pinch-off voltages `(V_P1, V_P2)` in mV.
    pub pinch_offs: [f64; 2],
    /// Reference barrier voltage for the optional barrier penalty.
    pub vb_ref: f64,
    /// Penalty scale in mV.
    pub v0: f64,
    pub eps_coeff: f64,
    pub include_vb_penalty: bool,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            p_target: ProbabilityVector::one_hot(DeviceState::Dd),
            pinch_offs: [0.0, 0.0],
            vb_ref: 0.0,
            v0: 20.0,
            eps_coeff: 0.1,
            include_vb_penalty: false,
        }
    }
}

impl FitnessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0) || !(self.eps_coeff >= 0.0) {
            return Err(RbcError::Config("fitness needs V0 > 0 and a non-negative penalty coefficient".into()));
        }
        self.p_target.validate()
    }

    pub fn penalty(&self, x: &[f64]) -> f64 {
        let mut s = ((x[0] - self.pinch_offs[0]) / self.v0).tanh() + ((x[1] - self.pinch_offs[1]) / self.v0).tanh();
        if self.include_vb_penalty && x.len() > 2 {
            s += ((x[2] - self.vb_ref) / self.v0).tanh();
        }
        self.eps_coeff * s
    }
}

/// Distance to the target probability vector plus the voltage penalty.
pub fn fitness(p: &ProbabilityVector, x: &[f64], cfg: &FitnessConfig) -> f64 {
    cfg.p_target.distance(p) + cfg.penalty(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplexConfig {
    pub plunger_step: f64,
    pub barrier_step: f64,
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iter: usize,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            plunger_step: 40.0,
            barrier_step: 25.0,
            x_tol: 1.0,
            f_tol: 1e-3,
            max_iter: 100,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.plunger_step, self.barrier_step, self.x_tol, self.f_tol, self.reflection, self.expansion];
        if positive.iter().any(|v| !(*v > 0.0)) || self.expansion <= self.reflection {
            return Err(RbcError::Config("simplex steps, tolerances and coefficients must be positive".into()));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0 && self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(RbcError::Config("contraction and shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Axis-aligned box of admissible points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn unbounded(n: usize) -> Self {
        Self { lo: vec![f64::NEG_INFINITY; n], hi: vec![f64::INFINITY; n] }
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// `x0` plus one step along each axis, oriented toward the missing dot.
///
/// Returns the vertices and any warnings raised while keeping them inside
/// `domain`. A step that would leave the domain is flipped when the opposite
/// direction fits and clipped otherwise.
pub fn initial_simplex(x0: &[f64], s0: DeviceState, cfg: &SimplexConfig, domain: &Domain) -> (Vec<Vec<f64>>, Vec<String>) {
    let (s1, s2) = match s0 {
        DeviceState::SdL => (-1.0, 1.0),
        DeviceState::SdR => (1.0, -1.0),
        DeviceState::Nd | DeviceState::SdC | DeviceState::Dd => (1.0, 1.0),
    };
    let mut steps = vec![s1 * cfg.plunger_step, s2 * cfg.plunger_step];
    if x0.len() > 2 {
        steps.push(cfg.barrier_step);
    }
    let mut warnings = Vec::new();
    let mut vertices = vec![x0.to_vec()];
    for (k, &step) in steps.iter().enumerate() {
        let mut v = x0.to_vec();
        v[k] += step;
        if !domain.contains(&v) {
            let flipped = x0[k] - step;
            if flipped >= domain.lo[k] && flipped <= domain.hi[k] {
                warnings.push(format!("simplex step along axis {k} flipped to stay inside the domain"));
                v[k] = flipped;
            } else {
                warnings.push(format!("simplex vertex along axis {k} clipped to the domain"));
                domain.clip(&mut v);
            }
        }
        vertices.push(v);
    }
    (vertices, warnings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    XTol,
    FTol,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub iterations: usize,
    pub reason: Termination,
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (a, pa) in simplex.iter().enumerate() {
        for pb in &simplex[a + 1..] {
            d = d.max(pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    d
}

/// Nelder-Mead minimization starting from `simplex`.
///
/// Candidate points are clipped into `domain` before evaluation. Stops as
/// soon as the simplex diameter drops below `x_tol`, the spread of vertex
/// values drops below `f_tol`, or `max_iter` moves have been made.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    simplex: Vec<Vec<f64>>,
    cfg: &SimplexConfig,
    domain: &Domain,
) -> NmResult {
    let n = simplex[0].len();
    assert_eq!(simplex.len(), n + 1, "a simplex in {n} dimensions needs {} vertices", n + 1);
    let mut eval = |mut x: Vec<f64>| {
        domain.clip(&mut x);
        let v = f(&x);
        (x, if v.is_nan() { f64::INFINITY } else { v })
    };
    let mut pts: Vec<(Vec<f64>, f64)> = simplex.into_iter().map(&mut eval).collect();
    let along = |c: &[f64], d: &[f64], t: f64| -> Vec<f64> { c.iter().zip(d).map(|(c, d)| c + t * (d - c)).collect() };

    let mut iterations = 0;
    let reason = loop {
        // stable sort keeps the earlier vertex first among equals
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = pts[n].1 - pts[0].1;
        if spread.is_finite() && spread < cfg.f_tol {
            break Termination::FTol;
        }
        let xs: Vec<Vec<f64>> = pts.iter().map(|p| p.0.clone()).collect();
        if diameter(&xs) < cfg.x_tol {
            break Termination::XTol;
        }
        if iterations >= cfg.max_iter {
            break Termination::MaxIter;
        }
        iterations += 1;

        let mut c = vec![0.0; n];
        for (x, _) in &pts[..n] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / n as f64;
            }
        }
        let worst = pts[n].clone();
        let (best_f, second_f) = (pts[0].1, pts[n - 1].1);

        let r = eval(along(&c, &worst.0, -cfg.reflection));
        if r.1 < best_f {
            let e = eval(along(&c, &r.0, cfg.expansion));
            pts[n] = if e.1 < r.1 { e } else { r };
            continue;
        }
        if r.1 < second_f {
            pts[n] = r;
            continue;
        }
        let contracted = if r.1 < worst.1 {
            let oc = eval(along(&c, &r.0, cfg.contraction));
            (oc.1 <= r.1).then_some(oc)
        } else {
            let ic = eval(along(&c, &worst.0, cfg.contraction));
            (ic.1 < worst.1).then_some(ic)
        };
        match contracted {
            Some(p) => pts[n] = p,
            None => {
                let best = pts[0].0.clone();
                for p in pts.iter_mut().skip(1) {
                    *p = eval(along(&best, &p.0, cfg.shrink));
                }
            }
        }
    };
    let (x_best, f_best) = pts.swap_remove(0);
    NmResult { x_best, f_best, iterations, reason }
}

/// Gate space explored by the tuner: a pre-measured scan, a stack of scans, or a live sampler.
pub trait TuneSpace {
    fn dims(&self) -> usize;

    /// Admissible ray origins; every ray of `ray` fits inside the space.
    fn domain(&self, ray: &RayConfig) -> Domain;

    fn acquire(&mut self, x: &[f64], ray: &RayConfig) -> Result<MProjection>;
}

fn shrink(w: Window, margin: f64) -> (Vec<f64>, Vec<f64>) {
    (vec![w.v1_min + margin, w.v2_min + margin], vec![w.v1_max - margin, w.v2_max - margin])
}

impl TuneSpace for &StabilityDiagram {
    fn dims(&self) -> usize {
        2
    }

    fn domain(&self, ray: &RayConfig) -> Domain {
        let (lo, hi) = shrink(self.extent(), ray.length_mv());
        Domain { lo, hi }
    }

    fn acquire(&mut self, x: &[f64], ray: &RayConfig) -> Result<MProjection> {
        acquire_offline(self, [x[0], x[1], self.vb], ray)
    }
}

/// Fractional barrier voltages read the nearest slice.
impl TuneSpace for &DiagramStack {
    fn dims(&self) -> usize {
        3
    }

    fn domain(&self, ray: &RayConfig) -> Domain {
        let (mut lo, mut hi) = shrink(self.slices[0].extent(), ray.length_mv());
        let (vb_lo, vb_hi) = self.vb_range();
        lo.push(vb_lo);
        hi.push(vb_hi);
        Domain { lo, hi }
    }

    fn acquire(&mut self, x: &[f64], ray: &RayConfig) -> Result<MProjection> {
        acquire_offline(self.nearest(x[2]), [x[0], x[1], x[2]], ray)
    }
}

/// Live tuning through a [`Sampler`], in the plunger plane or with the barrier free.
pub struct SamplerSpace<S> {
    pub sampler: S,
    /// Fixed barrier voltage in 2D mode.
    pub vb: f64,
    /// Barrier range; `Some` switches to 3D tuning.
    pub vb_range: Option<(f64, f64)>,
}

impl<S: Sampler> TuneSpace for SamplerSpace<S> {
    fn dims(&self) -> usize {
        if self.vb_range.is_some() {
            3
        } else {
            2
        }
    }

    fn domain(&self, ray: &RayConfig) -> Domain {
        let mut d = match self.sampler.domain() {
            Some(w) => {
                let (lo, hi) = shrink(w, ray.length_mv());
                Domain { lo, hi }
            }
            None => Domain::unbounded(2),
        };
        if let Some((a, b)) = self.vb_range {
            d.lo.push(a);
            d.hi.push(b);
        }
        d
    }

    fn acquire(&mut self, x: &[f64], ray: &RayConfig) -> Result<MProjection> {
        let vb = if self.vb_range.is_some() { x[2] } else { self.vb };
        acquire_live(&mut self.sampler, [x[0], x[1], vb], ray)
    }
}

/// Anything that turns a fingerprint into state probabilities.
pub trait Classify {
    fn classify(&self, f: &Fingerprint) -> Result<ProbabilityVector>;

    /// Expected fingerprint length, if fixed.
    fn input_dim(&self) -> Option<usize> {
        None
    }
}

impl Classify for MlpModel {
    fn classify(&self, f: &Fingerprint) -> Result<ProbabilityVector> {
        self.forward(f)
    }

    fn input_dim(&self) -> Option<usize> {
        Some(MlpModel::input_dim(self))
    }
}

impl<F: Fn(&Fingerprint) -> Result<ProbabilityVector>> Classify for F {
    fn classify(&self, f: &Fingerprint) -> Result<ProbabilityVector> {
        self(f)
    }
}

/// Everything between a gate point and a probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pipeline {
    pub ray: RayConfig,
    pub weight: WeightFn,
    pub peaks: PeakConfig,
    pub quality: QualityConfig,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self { ray: RayConfig::default(), weight: WeightFn::Inv, peaks: PeakConfig::default(), quality: QualityConfig::default() }
    }
}

impl Pipeline {
    /// State probabilities at `x`, or `None` when the projection fails the quality gate.
    pub fn probe<C: Classify + ?Sized, T: TuneSpace + ?Sized>(
        &self,
        classifier: &C,
        space: &mut T,
        x: &[f64],
    ) -> Result<Option<ProbabilityVector>> {
        let proj = space.acquire(x, &self.ray)?;
        if !quality_check(&proj, &self.quality) {
            return Ok(None);
        }
        let cfv = critical_features(&proj, &self.peaks);
        let fp = apply_weight(&cfv, self.weight, self.ray.l_px)?;
        classifier.classify(&fp).map(Some)
    }
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One objective evaluation; `p` is `None` when the quality gate rejected the point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    #[serde(with = "inf_as_null")]
    pub fitness: f64,
    pub p: Option<ProbabilityVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub start: Vec<f64>,
    /// Classification at the start, which orients the initial simplex.
    pub start_state: DeviceState,
    pub trajectory: Vec<Evaluation>,
    pub final_point: Vec<f64>,
    #[serde(with = "inf_as_null")]
    pub final_fitness: f64,
    pub iterations: usize,
    pub reason: Termination,
    pub warnings: Vec<String>,
    /// Filled in by [`success_rate`]-style checks against a region.
    pub success: Option<bool>,
}

/// Runs one tuning from `x0` in `space`.
pub fn tune<C: Classify + ?Sized, T: TuneSpace + ?Sized>(
    classifier: &C,
    space: &mut T,
    x0: &[f64],
    fitness_cfg: &FitnessConfig,
    simplex_cfg: &SimplexConfig,
    pipeline: &Pipeline,
) -> Result<TuneResult> {
    fitness_cfg.validate()?;
    simplex_cfg.validate()?;
    pipeline.ray.validate()?;
    if let Some(m) = classifier.input_dim() {
        if m != pipeline.ray.m {
            return Err(RbcError::Config(format!("classifier expects {m} rays, pipeline measures {}", pipeline.ray.m)));
        }
    }
    if x0.len() != space.dims() {
        return Err(RbcError::Dimension { expected: space.dims(), got: x0.len() });
    }
    let domain = space.domain(&pipeline.ray);
    let mut start = x0.to_vec();
    let mut warnings = Vec::new();
    if !domain.contains(&start) {
        domain.clip(&mut start);
        warnings.push("start point clipped to the domain".to_string());
    }

    let start_state = pipeline.probe(classifier, space, &start)?.map_or(DeviceState::Nd, |p| p.argmax());
    let (simplex, w) = initial_simplex(&start, start_state, simplex_cfg, &domain);
    warnings.extend(w);

    let mut trajectory = Vec::new();
    let mut failure = None;
    let nm = nelder_mead(
        |x| {
            let p = match pipeline.probe(classifier, space, x) {
                Ok(p) => p,
                Err(e) => {
                    failure.get_or_insert(e);
                    None
                }
            };
            let f = p.map_or(f64::INFINITY, |p| fitness(&p, x, fitness_cfg));
            trajectory.push(Evaluation { x: x.to_vec(), fitness: f, p });
            f
        },
        simplex,
        simplex_cfg,
        &domain,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(TuneResult {
        start,
        start_state,
        trajectory,
        final_point: nm.x_best,
        final_fitness: nm.f_best,
        iterations: nm.iterations,
        reason: nm.reason,
        warnings,
        success: None,
    })
}

/// Target polygon in the `(V_P1, V_P2)` plane at one barrier voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSlice {
    pub vb: f64,
    /// Empty when the slice has no target region.
    pub polygon: Vec<[f64; 2]>,
}

/// Success polygons, one per barrier slice (a single slice in 2D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRegion {
    pub slices: Vec<RegionSlice>,
}

impl SuccessRegion {
    pub fn polygon(polygon: Vec<[f64; 2]>) -> Result<Self> {
        let r = Self { slices: vec![RegionSlice { vb: 0.0, polygon }] };
        r.validate()?;
        Ok(r)
    }

    /// Region covering `state` in a scan; see [`trace_region`].
    pub fn from_diagram(diagram: &StabilityDiagram, state: DeviceState) -> Self {
        Self { slices: vec![RegionSlice { vb: diagram.vb, polygon: trace_region(diagram, state) }] }
    }

    pub fn from_stack(stack: &DiagramStack, state: DeviceState) -> Self {
        Self {
            slices: stack
                .slices
                .iter()
                .map(|d| RegionSlice { vb: d.vb, polygon: trace_region(d, state) })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slices.is_empty() {
            return Err(RbcError::Empty("success region"));
        }
        for s in &self.slices {
            if s.polygon.is_empty() {
                continue;
            }
            if s.polygon.len() < 3 {
                return Err(RbcError::Config("success polygon needs at least 3 vertices".into()));
            }
            if !is_simple(&s.polygon) {
                return Err(RbcError::Config("success polygon intersects itself".into()));
            }
        }
        Ok(())
    }

    /// Whether `x` lies in the region of its (nearest) barrier slice.
    pub fn contains(&self, x: &[f64]) -> bool {
        let slice = if x.len() > 2 && self.slices.len() > 1 {
            let mut best = &self.slices[0];
            for s in &self.slices[1..] {
                if (s.vb - x[2]).abs() < (best.vb - x[2]).abs() {
                    best = s;
                }
            }
            best
        } else {
            &self.slices[0]
        };
        !slice.polygon.is_empty() && point_in_polygon([x[0], x[1]], &slice.polygon)
    }
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let scale = (b[0] - a[0]).abs() + (b[1] - a[1]).abs();
    cross.abs() <= 1e-12 * scale.max(1.0)
        && p[0] >= a[0].min(b[0]) - 1e-12
        && p[0] <= a[0].max(b[0]) + 1e-12
        && p[1] >= a[1].min(b[1]) - 1e-12
        && p[1] <= a[1].max(b[1]) + 1e-12
}

/// Even-odd ray casting; points on an edge count as inside.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if on_segment(p, a, b) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        let v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 != o2 && o3 != o4 && o1 * o2 <= 0 && o3 * o4 <= 0 {
        return true;
    }
    (o1 == 0 && on_segment(c, a, b))
        || (o2 == 0 && on_segment(d, a, b))
        || (o3 == 0 && on_segment(a, c, d))
        || (o4 == 0 && on_segment(b, c, d))
}

/// No two non-adjacent edges touch.
pub fn is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Polygon around the part of a scan labeled `state`.
///
/// Each grid column contributes the bottom of its lowest run of `state`
/// nodes; the outline closes along the top of the scan. This is exact for
/// regions that are x-monotone and reach the upper edge of the window, which
/// holds for the double-dot region of a plunger scan (adding voltage only
/// adds electrons). Collinear vertices are dropped.
pub fn trace_region(diagram: &StabilityDiagram, state: DeviceState) -> Vec<[f64; 2]> {
    let top = *diagram.v2_axis.last().unwrap();
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for (i, &v1) in diagram.v1_axis.iter().enumerate() {
        if let Some(j) = (0..diagram.ny()).find(|&j| diagram.label_at(i, j) == state) {
            let v2 = diagram.v2_axis[j];
            if v2 < top {
                lower.push([v1, v2]);
            }
        }
    }
    // keep the longest run of consecutive columns
    let res = diagram.resolution;
    let mut best = (0, 0);
    let mut start = 0;
    for k in 1..=lower.len() {
        if k == lower.len() || lower[k][0] - lower[k - 1][0] > 1.5 * res {
            if k - start > best.1 - best.0 {
                best = (start, k);
            }
            start = k;
        }
    }
    let lower = &lower[best.0..best.1];
    if lower.len() < 2 {
        return Vec::new();
    }
    let mut poly: Vec<[f64; 2]> = lower.to_vec();
    poly.push([lower[lower.len() - 1][0], top]);
    poly.push([lower[0][0], top]);
    simplify(poly)
}

fn simplify(poly: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let n = poly.len();
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(n);
    for i in 0..n {
        let prev = if let Some(p) = out.last() { *p } else { poly[n - 1] };
        let (cur, next) = (poly[i], poly[(i + 1) % n]);
        let cross = (cur[0] - prev[0]) * (next[1] - prev[1]) - (cur[1] - prev[1]) * (next[0] - prev[0]);
        if cross.abs() > 1e-9 {
            out.push(cur);
        }
    }
    out
}

/// Fraction of runs whose final point lies in `region`, with the per-run outcomes.
pub fn success_rate(results: &[TuneResult], region: &SuccessRegion) -> Result<(f64, Vec<bool>)> {
    if results.is_empty() {
        return Err(RbcError::Empty("tuning results"));
    }
    region.validate()?;
    let hits: Vec<bool> = results.iter().map(|r| region.contains(&r.final_point)).collect();
    let rate = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
    Ok((rate, hits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SimplexConfig {
        SimplexConfig::default()
    }

    #[test]
    fn fitness_examples() {
        let c = FitnessConfig { eps_coeff: 0.0, ..Default::default() };
        let dd = ProbabilityVector::one_hot(DeviceState::Dd);
        let nd = ProbabilityVector::one_hot(DeviceState::Nd);
        assert_eq!(fitness(&dd, &[10.0, 20.0], &c), 0.0);
        assert!((fitness(&nd, &[10.0, 20.0], &c) - 2f64.sqrt()).abs() < 1e-15);
        let c = FitnessConfig { pinch_offs: [30.0, 40.0], ..Default::default() };
        assert_eq!(c.penalty(&[30.0, 40.0]), 0.0);
        let mut last = f64::NEG_INFINITY;
        for v in -100..100 {
            let e = c.penalty(&[v as f64, 40.0]);
            assert!(e >= last);
            last = e;
        }
    }

    #[test]
    fn barrier_penalty_is_opt_in() {
        let off = FitnessConfig::default();
        assert_eq!(off.penalty(&[0.0, 0.0, 80.0]), 0.0);
        let on = FitnessConfig { include_vb_penalty: true, ..off };
        assert!(on.penalty(&[0.0, 0.0, 80.0]) > 0.0);
    }

    #[test]
    fn simplex_orientation() {
        let d = Domain::unbounded(2);
        let (v, w) = initial_simplex(&[0.0, 0.0], DeviceState::Nd, &cfg(), &d);
        assert_eq!(v, vec![vec![0.0, 0.0], vec![40.0, 0.0], vec![0.0, 40.0]]);
        assert!(w.is_empty());
        let (v, _) = initial_simplex(&[0.0, 0.0], DeviceState::SdL, &cfg(), &d);
        assert_eq!(v[1], vec![-40.0, 0.0]);
        let (v, _) = initial_simplex(&[0.0, 0.0], DeviceState::SdR, &cfg(), &d);
        assert_eq!(v[2], vec![0.0, -40.0]);
        let (v, _) = initial_simplex(&[0.0, 0.0, 0.0], DeviceState::SdC, &cfg(), &Domain::unbounded(3));
        assert_eq!(v.len(), 4);
        assert_eq!(v[3], vec![0.0, 0.0, 25.0]);
    }

    #[test]
    fn simplex_stays_in_domain() {
        let d = Domain { lo: vec![0.0, 0.0, -100.0], hi: vec![100.0, 100.0, 150.0] };
        let (v, w) = initial_simplex(&[90.0, 50.0, 150.0], DeviceState::SdC, &cfg(), &d);
        assert_eq!(v[1], vec![50.0, 50.0, 150.0]);
        assert_eq!(v[3], vec![90.0, 50.0, 125.0]);
        assert_eq!(w.len(), 2);
        let tight = Domain { lo: vec![0.0, 0.0], hi: vec![30.0, 30.0] };
        let (v, w) = initial_simplex(&[10.0, 10.0], DeviceState::Dd, &cfg(), &tight);
        assert_eq!(v[1], vec![30.0, 10.0]);
        assert!(w[0].contains("clipped"));
        assert!(v.iter().all(|x| tight.contains(x)));
    }

    #[test]
    fn quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let c = SimplexConfig { plunger_step: 1.0, x_tol: 1e-4, f_tol: 1e-10, ..cfg() };
        let (s, _) = initial_simplex(&[0.0, 0.0], DeviceState::Nd, &c, &Domain::unbounded(2));
        let r = nelder_mead(f, s, &c, &Domain::unbounded(2));
        assert!(r.iterations <= 100);
        assert!(((r.x_best[0] - 3.0).powi(2) + (r.x_best[1] + 1.0).powi(2)).sqrt() < 0.01, "{:?}", r);
    }

    #[test]
    fn constant_objective_stops_at_once() {
        let s = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = nelder_mead(|_| 5.0, s.clone(), &cfg(), &Domain::unbounded(2));
        assert_eq!(r.reason, Termination::FTol);
        assert_eq!(r.iterations, 0);
        assert!(s.contains(&r.x_best));
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let c = SimplexConfig { plunger_step: 0.5, x_tol: 1e-8, f_tol: 1e-12, max_iter: 200, ..cfg() };
        let s = vec![vec![-1.2, 1.0], vec![-0.7, 1.0], vec![-1.2, 1.5]];
        let r = nelder_mead(f, s, &c, &Domain::unbounded(2));
        assert!(r.f_best < 1e-3, "{r:?}");
    }

    #[test]
    fn best_never_worse_than_start() {
        let f = |x: &[f64]| (x[0] * 0.3).sin() + (x[1] * 0.2).cos();
        let s = vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]];
        let start_best = s.iter().map(|x| f(x)).fold(f64::INFINITY, f64::min);
        let r = nelder_mead(f, s, &cfg(), &Domain::unbounded(2));
        assert!(r.f_best <= start_best);
    }

    #[test]
    fn clipped_search_stays_inside() {
        let d = Domain { lo: vec![0.0, 0.0], hi: vec![2.0, 2.0] };
        let mut seen = Vec::new();
        let r = nelder_mead(
            |x| {
                seen.push(x.to_vec());
                -x[0] - x[1]
            },
            vec![vec![0.5, 0.5], vec![1.0, 0.5], vec![0.5, 1.0]],
            &SimplexConfig { x_tol: 1e-3, f_tol: 1e-9, ..cfg() },
            &d,
        );
        assert!(seen.iter().all(|x| d.contains(x)));
        assert!((r.x_best[0] - 2.0).abs() < 1e-2 && (r.x_best[1] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn polygon_membership() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(point_in_polygon([0.5, 0.5], &sq));
        assert!(point_in_polygon([1.0, 0.3], &sq));
        assert!(point_in_polygon([0.0, 0.0], &sq));
        assert!(!point_in_polygon([1.0001, 0.5], &sq));
        assert!(!point_in_polygon([-3.0, 0.0], &sq));
        // concave: an L shape
        let l = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        assert!(point_in_polygon([0.5, 1.5], &l));
        assert!(!point_in_polygon([1.5, 1.5], &l));
    }

    #[test]
    fn simple_polygons() {
        assert!(is_simple(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]));
        assert!(!is_simple(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]));
        assert!(SuccessRegion::polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(SuccessRegion::polygon(vec![[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    fn result_at(x: Vec<f64>) -> TuneResult {
        TuneResult {
            start: x.clone(),
            start_state: DeviceState::Nd,
            trajectory: vec![Evaluation { x: x.clone(), fitness: 0.0, p: None }],
            final_point: x,
            final_fitness: 0.0,
            iterations: 0,
            reason: Termination::FTol,
            warnings: vec![],
            success: None,
        }
    }

    #[test]
    fn success_rate_counts() {
        let region = SuccessRegion::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let centroid: Vec<TuneResult> = (0..5).map(|_| result_at(vec![0.5, 0.5])).collect();
        assert_eq!(success_rate(&centroid, &region).unwrap().0, 1.0);
        let far: Vec<TuneResult> = (0..5).map(|_| result_at(vec![10.0, -4.0])).collect();
        assert_eq!(success_rate(&far, &region).unwrap().0, 0.0);
        // 5x5 grid over [-0.5, 1.5]^2 in steps of 0.5: x, y in {0, 0.5, 1} are inside
        let grid: Vec<TuneResult> = (0..5)
            .flat_map(|i| (0..5).map(move |j| result_at(vec![-0.5 + 0.5 * i as f64, -0.5 + 0.5 * j as f64])))
            .collect();
        let (rate, hits) = success_rate(&grid, &region).unwrap();
        assert_eq!(hits.iter().filter(|&&h| h).count(), 9);
        assert!((rate - 9.0 / 25.0).abs() < 1e-15);
        assert!(success_rate(&[], &region).is_err());
    }

    #[test]
    fn infinite_fitness_round_trips() {
        let mut r = result_at(vec![1.0, 2.0]);
        r.trajectory[0].fitness = f64::INFINITY;
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<TuneResult>(&json).unwrap(), r);
    }

    #[test]
    fn region_per_slice() {
        let region = SuccessRegion {
            slices: vec![
                RegionSlice { vb: 0.0, polygon: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] },
                RegionSlice { vb: 50.0, polygon: vec![] },
            ],
        };
        assert!(region.contains(&[0.5, 0.5, 10.0]));
        assert!(!region.contains(&[0.5, 0.5, 40.0]));
    }
}
