use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use rbc_core::autotune::{success_rate, tune, Pipeline, SuccessRegion};
use rbc_core::classifier::{evaluate_ensemble, train, MlpModel, TrainConfig};
use rbc_core::fingerprint::{apply_weight, Fingerprint, WeightFn};
use rbc_core::qdsim::{make_device, render_diagram, render_stack, DeviceParams, DeviceState, ParamRanges, Window};
use rbc_core::rayscan::{acquire_live, acquire_offline, LiveDevice, MProjection, ProjectionFile};
use rbc_core::sigproc::critical_features;
use rbc_core::{seed, RbcError};
use rbc_harness::dataset::{class_histogram, gen_dataset, load_dataset, save_dataset, DatasetSpec};
use rbc_harness::experiments::{reference_model, reference_scenario, run_tune_sweep, tune_csv, Scan, StartLayout, TuneSweepSpec};
use rbc_harness::io::{load_diagram, load_json, load_model, load_stack, save_diagram, save_json, save_model, save_stack, save_text};
use rbc_harness::sweep::{run_sweep, sweep_csv, SweepRow, SweepSpec};

/// Default directory for outputs when `--out` is not given.
const OUT_DIR_VAR: &str = "RBC_OUT_DIR";

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] RbcError),
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Parser)]
#[command(name = "rbc", version, about = "Ray-based classification and autotuning of simulated double quantum dots")]
struct Cli {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON file with the subcommand's configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (defaults to a per-command name in $RBC_OUT_DIR or the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a stability diagram, or a barrier stack with --stack. Config: device parameters.
    Simulate {
        /// Random device from this seed instead of the reference device.
        #[arg(long)]
        device_seed: Option<u64>,
        /// v1_min,v1_max,v2_min,v2_max in mV.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.5)]
        resolution: f64,
        #[arg(long, default_value_t = 50.0)]
        vb: f64,
        /// Barrier voltages of a stack, comma separated.
        #[arg(long, value_delimiter = ',')]
        stack: Option<Vec<f64>>,
        #[arg(long)]
        noise_seed: Option<u64>,
    },
    /// Measure an M-projection at one origin. Config: pipeline.
    Rays {
        /// v1,v2[,vb] in mV.
        #[arg(long, value_delimiter = ',', required = true)]
        origin: Vec<f64>,
        /// Interpolate in a saved diagram instead of measuring a live device.
        #[arg(long)]
        diagram: Option<PathBuf>,
        #[arg(long)]
        device_seed: Option<u64>,
        #[command(flatten)]
        ray: RayArgs,
    },
    /// Turn a projection into a weighted fingerprint. Config: pipeline.
    Fingerprint {
        #[arg(long)]
        projection: PathBuf,
        #[arg(long, value_parser = parse_weight)]
        weight: Option<WeightFn>,
    },
    /// Classify a fingerprint; prints the five state probabilities.
    Classify {
        #[arg(long)]
        fingerprint: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Generate a class-balanced fingerprint dataset. Config: dataset spec.
    GenDataset {
        #[arg(long)]
        devices: Option<usize>,
        #[arg(long)]
        per_device: Option<usize>,
        #[arg(long, value_parser = parse_weight)]
        weight: Option<WeightFn>,
        #[command(flatten)]
        ray: RayArgs,
    },
    /// Train one model on a dataset. Config: training parameters.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate an ensemble on a test dataset; writes a JSON report and a CSV row.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Model files, repeated or comma separated.
        #[arg(long = "model", value_delimiter = ',', required = true)]
        models: Vec<PathBuf>,
    },
    /// Accuracy over ray counts, lengths and weights. Config: sweep spec.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        l_px: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_weight)]
        weights: Option<Vec<WeightFn>>,
        /// Models per cell.
        #[arg(long)]
        models: Option<usize>,
        #[arg(long)]
        devices: Option<usize>,
        #[arg(long)]
        per_device: Option<usize>,
        #[arg(long)]
        test_devices: Option<usize>,
        #[arg(long)]
        test_per_device: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// One tuning run; writes the full trajectory. Config: tuning spec.
    Tune {
        /// v1,v2 (2D) or v1,v2,vb (3D).
        #[arg(long, value_delimiter = ',', required = true)]
        x0: Vec<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Saved diagram or stack; the reference scan when absent.
        #[arg(long)]
        scan: Option<PathBuf>,
    },
    /// Tuning from many starts on the reference scan; writes per-start CSV. Config: tuning spec.
    TuneSweep {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        starts: Option<usize>,
        /// Side of the start square (mV).
        #[arg(long)]
        window: Option<f64>,
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long, value_enum)]
        layout: Option<Layout>,
        /// Low corner of the start square relative to pinch-off (mV).
        #[arg(long)]
        below_pinch: Option<f64>,
    },
}

#[derive(clap::Args)]
struct RayArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    l_px: Option<usize>,
    #[arg(long)]
    px_mv: Option<f64>,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    Grid,
    Uniform,
}

fn parse_weight(s: &str) -> std::result::Result<WeightFn, String> {
    let up = s.to_ascii_uppercase().replace('-', "_");
    WeightFn::ALL.into_iter().find(|w| w.id() == up).ok_or_else(|| {
        let ids: Vec<&str> = WeightFn::ALL.iter().map(|w| w.id()).collect();
        format!("unknown weight `{s}` (expected one of {})", ids.join(", "))
    })
}

impl RayArgs {
    fn apply(&self, ray: &mut rbc_core::rayscan::RayConfig) {
        if let Some(m) = self.m {
            ray.m = m;
        }
        if let Some(l) = self.l_px {
            ray.l_px = l;
        }
        if let Some(px) = self.px_mv {
            ray.px_mv = px;
        }
    }
}

impl TrainArgs {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        if let Some(lr) = self.learning_rate {
            cfg.learning_rate = lr;
        }
    }
}

fn config_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> CliResult<T> {
    match path {
        Some(p) => Ok(load_json(p)?),
        None => Ok(T::default()),
    }
}

fn out_path(out: &Option<PathBuf>, default_name: &str) -> PathBuf {
    match out {
        Some(p) => p.clone(),
        None => match std::env::var_os(OUT_DIR_VAR) {
            Some(dir) => Path::new(&dir).join(default_name),
            None => PathBuf::from(default_name),
        },
    }
}

fn device(device_seed: Option<u64>) -> CliResult<DeviceParams> {
    Ok(match device_seed {
        Some(s) => make_device(s, &ParamRanges::default())?,
        None => DeviceParams::reference(),
    })
}

fn gate(v: &[f64], default_vb: f64) -> CliResult<[f64; 3]> {
    match *v {
        [a, b] => Ok([a, b, default_vb]),
        [a, b, c] => Ok([a, b, c]),
        _ => usage(format!("expected 2 or 3 voltages, got {}", v.len())),
    }
}

fn load_fingerprint(path: &Path) -> CliResult<Fingerprint> {
    Ok(load_json(path)?)
}

fn run(cli: Cli) -> CliResult<()> {
    let root = cli.seed;
    match cli.cmd {
        Cmd::Simulate { device_seed, window, resolution, vb, stack, noise_seed } => {
            let params: DeviceParams = match &cli.config {
                Some(p) => load_json(p)?,
                None => device(device_seed)?,
            };
            params.validate()?;
            let window = match window.as_deref() {
                Some(&[a, b, c, d]) => Window { v1_min: a, v1_max: b, v2_min: c, v2_max: d },
                Some(_) => return usage("--window takes v1_min,v1_max,v2_min,v2_max"),
                None => {
                    let p = params.pinch_offs(vb);
                    let lo = [(p[0] / resolution).floor() * resolution - 100.0, (p[1] / resolution).floor() * resolution - 100.0];
                    Window::square(lo[0], lo[1], 280.0)
                }
            };
            let noise_seed = noise_seed.unwrap_or_else(|| seed::derive(root, "scan", 0));
            match stack {
                Some(vbs) => {
                    let s = render_stack(&params, &window, resolution, &vbs, noise_seed)?;
                    let path = out_path(&cli.out, "stack.json");
                    save_stack(&path, &s)?;
                    println!("wrote {} slices to {}", s.slices.len(), path.display());
                }
                None => {
                    let d = render_diagram(&params, &window, resolution, vb, noise_seed)?;
                    let path = out_path(&cli.out, "diagram.json");
                    save_diagram(&path, &d)?;
                    println!("wrote {}x{} scan to {}", d.nx(), d.ny(), path.display());
                }
            }
        }
        Cmd::Rays { origin, diagram, device_seed, ray } => {
            let mut pipeline: Pipeline = config_or_default(&cli.config)?;
            ray.apply(&mut pipeline.ray);
            let proj = match diagram {
                Some(path) => {
                    let d = load_diagram(&path)?;
                    acquire_offline(&d, gate(&origin, d.vb)?, &pipeline.ray)?
                }
                None => {
                    let params = device(device_seed)?;
                    let mut live = LiveDevice::new(params, pipeline.ray.px_mv, seed::derive(root, "noise", 0));
                    acquire_live(&mut live, gate(&origin, 0.0)?, &pipeline.ray)?
                }
            };
            let path = out_path(&cli.out, "projection.json");
            save_json(&path, &ProjectionFile::from(&proj))?;
            println!("wrote {} rays of {} px to {}", proj.config.m, proj.config.l_px, path.display());
        }
        Cmd::Fingerprint { projection, weight } => {
            let mut pipeline: Pipeline = config_or_default(&cli.config)?;
            if let Some(w) = weight {
                pipeline.weight = w;
            }
            let proj = MProjection::try_from(load_json::<ProjectionFile>(&projection)?)?;
            let cfv = critical_features(&proj, &pipeline.peaks);
            let fp = apply_weight(&cfv, pipeline.weight, proj.config.l_px)?;
            let path = out_path(&cli.out, "fingerprint.json");
            save_json(&path, &fp)?;
            println!("{}", serde_json::to_string(&fp.values).map_err(RbcError::from)?);
        }
        Cmd::Classify { fingerprint, model } => {
            if cli.config.is_some() {
                return usage("classify takes no --config");
            }
            let fp = load_fingerprint(&fingerprint)?;
            let p = load_model(&model)?.forward(&fp)?;
            if let Some(path) = &cli.out {
                save_json(path, &p)?;
            }
            println!("{}", serde_json::to_string(&p.0).map_err(RbcError::from)?);
        }
        Cmd::GenDataset { devices, per_device, weight, ray } => {
            let mut spec: DatasetSpec = config_or_default(&cli.config)?;
            spec.seed = root;
            if let Some(n) = devices {
                spec.n_devices = n;
            }
            if let Some(n) = per_device {
                spec.per_device = n;
            }
            if let Some(w) = weight {
                spec.weight = w;
            }
            ray.apply(&mut spec.ray);
            let records = gen_dataset(&spec)?;
            let path = out_path(&cli.out, "dataset.jsonl");
            save_dataset(&path, &records)?;
            println!("wrote {} records to {} (classes {:?})", records.len(), path.display(), class_histogram(&records));
        }
        Cmd::Train { data, train: args } => {
            let mut cfg: TrainConfig = config_or_default(&cli.config)?;
            args.apply(&mut cfg);
            cfg.seed = seed::derive(root, "train", 0);
            let records = load_dataset(&data)?;
            let m = records.first().ok_or(RbcError::Empty("dataset"))?.m;
            let model = MlpModel::init(m, seed::derive(root, "init", 0))?;
            let (model, history) = train(model, &records, &cfg)?;
            let path = out_path(&cli.out, "model.json");
            save_model(&path, &model)?;
            println!(
                "trained {} epochs: loss {:.4} -> {:.4}, validation accuracy {:.4}; wrote {}",
                cfg.epochs,
                history.initial_loss,
                history.train_loss.last().copied().unwrap_or(f64::NAN),
                history.val_accuracy.last().copied().unwrap_or(f64::NAN),
                path.display()
            );
        }
        Cmd::Eval { data, models } => {
            if cli.config.is_some() {
                return usage("eval takes no --config");
            }
            let test = load_dataset(&data)?;
            let models = models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>, _>>()?;
            let report = evaluate_ensemble(&models, &test)?;
            let path = out_path(&cli.out, "eval.json");
            save_json(&path, &report)?;
            let csv = format!("models,mean_accuracy,std_accuracy\n{},{},{}\n", models.len(), report.mean, report.std);
            save_text(&path.with_extension("csv"), &csv)?;
            print!("{csv}");
        }
        Cmd::Sweep { m, l_px, weights, models, devices, per_device, test_devices, test_per_device, train } => {
            let mut spec: SweepSpec = config_or_default(&cli.config)?;
            spec.seed = root;
            if let Some(v) = m {
                spec.ms = v;
            }
            if let Some(v) = l_px {
                spec.lengths = v;
            }
            if let Some(v) = weights {
                spec.weights = v;
            }
            if let Some(n) = models {
                spec.models_per_cell = n;
            }
            if let Some(n) = devices {
                spec.train_devices = n;
            }
            if let Some(n) = per_device {
                spec.train_per_device = n;
            }
            if let Some(n) = test_devices {
                spec.test_devices = n;
            }
            if let Some(n) = test_per_device {
                spec.test_per_device = n;
            }
            train.apply(&mut spec.train);
            let rows: Vec<SweepRow> = run_sweep(&spec)?.into_iter().map(|c| c.row).collect();
            let csv = sweep_csv(&rows);
            let path = out_path(&cli.out, "sweep.csv");
            save_text(&path, &csv)?;
            print!("{csv}");
        }
        Cmd::Tune { x0, model, scan } => {
            let mut spec: TuneSweepSpec = config_or_default(&cli.config)?;
            spec.seed = root;
            spec.dims = x0.len();
            spec.starts = 4;
            let classifier = tuning_model(&model, root, &spec)?;
            let scenario = reference_scenario(&spec)?;
            let (scan, region) = match scan {
                None => (scenario.scan, scenario.region),
                Some(path) if spec.dims == 2 => {
                    let d = load_diagram(&path)?;
                    let region = SuccessRegion::from_diagram(&d, DeviceState::Dd);
                    (Scan::Diagram(d), region)
                }
                Some(path) => {
                    let s = load_stack(&path)?;
                    let region = SuccessRegion::from_stack(&s, DeviceState::Dd);
                    (Scan::Stack(s), region)
                }
            };
            let mut result = match &scan {
                Scan::Diagram(d) => tune(&classifier, &mut &*d, &x0, &scenario.fitness, &spec.simplex, &spec.pipeline)?,
                Scan::Stack(s) => tune(&classifier, &mut &*s, &x0, &scenario.fitness, &spec.simplex, &spec.pipeline)?,
            };
            if region.validate().is_ok() {
                result.success = Some(success_rate(std::slice::from_ref(&result), &region)?.0 == 1.0);
            }
            let path = out_path(&cli.out, "tune.json");
            save_json(&path, &result)?;
            println!(
                "{:?} -> {:?} after {} iterations ({:?}), success {:?}",
                result.start, result.final_point, result.iterations, result.reason, result.success
            );
        }
        Cmd::TuneSweep { model, starts, window, dims, layout, below_pinch } => {
            let mut spec: TuneSweepSpec = config_or_default(&cli.config)?;
            spec.seed = root;
            if let Some(d) = dims {
                spec.dims = d;
                if d == 3 && starts.is_none() && cli.config.is_none() {
                    spec.starts = TuneSweepSpec::three_d().starts;
                }
            }
            if let Some(n) = starts {
                spec.starts = n;
            }
            if let Some(w) = window {
                spec.window_mv = w;
            }
            if let Some(b) = below_pinch {
                spec.below_pinch_mv = b;
            }
            if let Some(l) = layout {
                spec.layout = match l {
                    Layout::Grid => StartLayout::Grid,
                    Layout::Uniform => StartLayout::Uniform,
                };
            }
            let classifier = tuning_model(&model, root, &spec)?;
            let scenario = reference_scenario(&spec)?;
            let report = run_tune_sweep(&classifier, &scenario, &spec)?;
            let path = out_path(&cli.out, "tune_sweep.csv");
            save_text(&path, &tune_csv(&report.results))?;
            println!("success rate {:.4} over {} starts; wrote {}", report.rate, report.results.len(), path.display());
        }
    }
    Ok(())
}

/// The given model, or the reference model trained from `root`.
fn tuning_model(path: &Option<PathBuf>, root: u64, spec: &TuneSweepSpec) -> CliResult<MlpModel> {
    match path {
        Some(p) => Ok(load_model(p)?),
        None => {
            let mut sweep = SweepSpec::reference(vec![spec.pipeline.weight]);
            sweep.ms = vec![spec.pipeline.ray.m];
            sweep.lengths = vec![spec.pipeline.ray.l_px];
            sweep.px_mv = spec.pipeline.ray.px_mv;
            sweep.seed = root;
            eprintln!("no --model given; training the reference model");
            Ok(reference_model(&sweep)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
