//! Tuning campaigns on the reference device.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rbc_core::autotune::{
    success_rate, tune, Classify, FitnessConfig, Pipeline, SimplexConfig, SuccessRegion, TuneResult,
};
use rbc_core::classifier::{Design, MlpModel};
use rbc_core::qdsim::{
    render_diagram, render_stack, DeviceParams, DeviceState, DiagramStack, StabilityDiagram, Window,
};
use rbc_core::rayscan::RayConfig;
use rbc_core::seed;
use rbc_core::{RbcError, Result};

use crate::dataset::{gen_features, weigh};
use crate::sweep::{train_ensemble, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartLayout {
    /// `n × n` grid including the square's corners; needs a square start count.
    Grid,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneSweepSpec {
    /// 2 tunes the plungers on one scan, 3 adds the barrier over a stack.
    pub dims: usize,
    pub starts: usize,
    pub layout: StartLayout,
    /// Side of the start square.
    pub window_mv: f64,
    /// How far the square's low corner sits below the pinch-off point.
    pub below_pinch_mv: f64,
    /// Scan border around the start square; must exceed the ray length.
    pub margin_mv: f64,
    pub resolution_mv: f64,
    /// Barrier of the 2D scan; pinch-offs are taken here in both modes.
    pub vb_mv: f64,
    /// Stack slices for 3D; runs start in the last one.
    pub stack_vb_mv: Vec<f64>,
    pub pipeline: Pipeline,
    pub v0: f64,
    pub eps_coeff: f64,
    pub include_vb_penalty: bool,
    pub simplex: SimplexConfig,
    pub seed: u64,
}

impl Default for TuneSweepSpec {
    fn default() -> Self {
        Self {
            dims: 2,
            starts: 225,
            layout: StartLayout::Grid,
            window_mv: 200.0,
            below_pinch_mv: 60.0,
            margin_mv: 40.0,
            resolution_mv: 0.5,
            vb_mv: 50.0,
            stack_vb_mv: vec![-100.0, -50.0, 0.0, 50.0, 100.0, 150.0],
            pipeline: Pipeline::default(),
            v0: 20.0,
            eps_coeff: 0.1,
            include_vb_penalty: false,
            simplex: SimplexConfig::default(),
            seed: 0,
        }
    }
}

impl TuneSweepSpec {
    /// The 3D campaign: 100 starts in the top slice.
    pub fn three_d() -> Self {
        Self { dims: 3, starts: 100, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims != 2 && self.dims != 3 {
            return Err(RbcError::Config(format!("tuning space must be 2D or 3D, got {}", self.dims)));
        }
        if self.starts == 0 {
            return Err(RbcError::Config("need at least one start".into()));
        }
        if self.layout == StartLayout::Grid && grid_side(self.starts).is_none() {
            return Err(RbcError::Config(format!("{} starts do not form a square grid", self.starts)));
        }
        if !(self.window_mv > 0.0 && self.resolution_mv > 0.0) {
            return Err(RbcError::Config("window and resolution must be positive".into()));
        }
        if !(self.margin_mv >= self.pipeline.ray.length_mv()) {
            return Err(RbcError::Config("scan margin must cover the ray length".into()));
        }
        if self.dims == 3 && self.stack_vb_mv.is_empty() {
            return Err(RbcError::Empty("barrier slice list"));
        }
        self.pipeline.ray.validate()?;
        self.simplex.validate()
    }
}

fn grid_side(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n && s >= 2).then_some(s)
}

#[derive(Debug, Clone)]
pub enum Scan {
    Diagram(StabilityDiagram),
    Stack(DiagramStack),
}

/// Everything a campaign needs besides the classifier.
#[derive(Debug, Clone)]
pub struct TuneScenario {
    pub params: DeviceParams,
    pub start_square: Window,
    pub fitness: FitnessConfig,
    pub scan: Scan,
    pub region: SuccessRegion,
    pub starts: Vec<Vec<f64>>,
}

/// Scans, target region and start points for `spec` on the reference device.
pub fn reference_scenario(spec: &TuneSweepSpec) -> Result<TuneScenario> {
    spec.validate()?;
    let params = DeviceParams::reference();
    let pinch = params.pinch_offs(spec.vb_mv);
    let res = spec.resolution_mv;
    let lo = [
        ((pinch[0] - spec.below_pinch_mv) / res).floor() * res,
        ((pinch[1] - spec.below_pinch_mv) / res).floor() * res,
    ];
    let start_square = Window::square(lo[0], lo[1], spec.window_mv);
    let border = (spec.margin_mv / res).ceil() * res;
    let scan_window = Window::square(lo[0] - border, lo[1] - border, spec.window_mv + 2.0 * border);
    let noise_seed = seed::derive(spec.seed, "scan", 0);

    let fitness = FitnessConfig {
        pinch_offs: pinch,
        vb_ref: spec.vb_mv,
        v0: spec.v0,
        eps_coeff: spec.eps_coeff,
        include_vb_penalty: spec.include_vb_penalty,
        ..Default::default()
    };
    let (scan, region, start_vb) = if spec.dims == 2 {
        let d = render_diagram(&params, &scan_window, res, spec.vb_mv, noise_seed)?;
        let region = SuccessRegion::from_diagram(&d, DeviceState::Dd);
        (Scan::Diagram(d), region, None)
    } else {
        let s = render_stack(&params, &scan_window, res, &spec.stack_vb_mv, noise_seed)?;
        let region = SuccessRegion::from_stack(&s, DeviceState::Dd);
        let top = *spec.stack_vb_mv.last().unwrap();
        (Scan::Stack(s), region, Some(top))
    };
    region.validate()?;

    let plane: Vec<[f64; 2]> = match spec.layout {
        StartLayout::Grid => {
            let n = grid_side(spec.starts).unwrap();
            let step = spec.window_mv / (n - 1) as f64;
            (0..spec.starts).map(|k| [lo[0] + (k % n) as f64 * step, lo[1] + (k / n) as f64 * step]).collect()
        }
        StartLayout::Uniform => {
            let mut rng = seed::rng(spec.seed, "starts", 0);
            (0..spec.starts)
                .map(|_| {
                    [
                        rng.random_range(lo[0]..=lo[0] + spec.window_mv),
                        rng.random_range(lo[1]..=lo[1] + spec.window_mv),
                    ]
                })
                .collect()
        }
    };
    let starts = plane
        .into_iter()
        .map(|p| match start_vb {
            Some(vb) => vec![p[0], p[1], vb],
            None => vec![p[0], p[1]],
        })
        .collect();
    Ok(TuneScenario { params, start_square, fitness, scan, region, starts })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneSweepReport {
    pub rate: f64,
    /// One result per start, in start order, with `success` filled in.
    pub results: Vec<TuneResult>,
}

/// Tunes from every start of `scenario`, in parallel.
pub fn run_tune_sweep<C: Classify + Sync>(
    classifier: &C,
    scenario: &TuneScenario,
    spec: &TuneSweepSpec,
) -> Result<TuneSweepReport> {
    let mut results: Vec<TuneResult> = scenario
        .starts
        .par_iter()
        .map(|x0| match &scenario.scan {
            Scan::Diagram(d) => tune(classifier, &mut &*d, x0, &scenario.fitness, &spec.simplex, &spec.pipeline),
            Scan::Stack(s) => tune(classifier, &mut &*s, x0, &scenario.fitness, &spec.simplex, &spec.pipeline),
        })
        .collect::<Result<_>>()?;
    let (rate, hits) = success_rate(&results, &scenario.region)?;
    for (r, h) in results.iter_mut().zip(hits) {
        r.success = Some(h);
    }
    Ok(TuneSweepReport { rate, results })
}

pub fn tune_csv(results: &[TuneResult]) -> String {
    let three = results.first().is_some_and(|r| r.start.len() == 3);
    let mut out = String::from(if three {
        "start_x,start_y,start_vb,final_x,final_y,final_vb,iterations,success\n"
    } else {
        "start_x,start_y,final_x,final_y,iterations,success\n"
    });
    for r in results {
        let coords: Vec<String> = r.start.iter().chain(&r.final_point).map(f64::to_string).collect();
        out.push_str(&format!(
            "{},{},{}\n",
            coords.join(","),
            r.iterations,
            u8::from(r.success.unwrap_or(false))
        ));
    }
    out
}

/// Member 0 of the first cell of `spec`, trained on its first weight.
pub fn reference_model(spec: &SweepSpec) -> Result<MlpModel> {
    spec.validate()?;
    let ray = RayConfig::new(spec.ms[0], spec.lengths[0], spec.px_mv)?;
    let mut one = spec.clone();
    one.models_per_cell = 1;
    let features = gen_features(&one.train_dataset(ray))?;
    let train = Design::from_records(&weigh(&features, &ray, spec.weights[0])?)?;
    Ok(train_ensemble(&train, &spec.train, 1, spec.seed)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_starts_cover_the_square() {
        let spec = TuneSweepSpec { starts: 9, ..Default::default() };
        let sc = reference_scenario(&spec).unwrap();
        assert_eq!(sc.starts.len(), 9);
        let w = sc.start_square;
        assert_eq!(sc.starts[0], vec![w.v1_min, w.v2_min]);
        assert_eq!(sc.starts[8], vec![w.v1_max, w.v2_max]);
        assert!(matches!(sc.scan, Scan::Diagram(_)));
    }

    #[test]
    fn three_d_starts_in_top_slice() {
        let spec = TuneSweepSpec { starts: 4, resolution_mv: 2.0, ..TuneSweepSpec::three_d() };
        let sc = reference_scenario(&spec).unwrap();
        assert!(sc.starts.iter().all(|x| x.len() == 3 && x[2] == 150.0));
        // merged at the top barrier: no target region there
        assert!(sc.region.slices.last().unwrap().polygon.is_empty());
        assert!(!sc.region.slices[0].polygon.is_empty());
    }

    #[test]
    fn non_square_grid_rejected() {
        assert!(TuneSweepSpec { starts: 10, ..Default::default() }.validate().is_err());
        assert!(TuneSweepSpec { starts: 10, layout: StartLayout::Uniform, ..Default::default() }.validate().is_ok());
    }
}
