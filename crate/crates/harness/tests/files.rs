use rbc_core::autotune::{tune, FitnessConfig, Pipeline, SimplexConfig, SuccessRegion};
use rbc_core::classifier::MlpModel;
use rbc_core::fingerprint::{apply_weight, Fingerprint, WeightFn};
use rbc_core::qdsim::{render_diagram, render_stack, DeviceParams, DeviceState, Window};
use rbc_core::rayscan::{acquire_offline, MProjection, ProjectionFile, RayConfig};
use rbc_core::sigproc::{critical_features, PeakConfig};
use rbc_harness::dataset::{class_histogram, gen_dataset, load_dataset, save_dataset, DatasetSpec};
use rbc_harness::io::{load_diagram, load_json, load_model, load_stack, save_diagram, save_json, save_model, save_stack};

fn small_window() -> Window {
    Window::square(20.0, 20.0, 80.0)
}

#[test]
fn diagram_and_stack_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = DeviceParams::reference();
    let d = render_diagram(&p, &small_window(), 0.5, 50.0, 9).unwrap();
    let path = dir.path().join("d.json");
    save_diagram(&path, &d).unwrap();
    assert_eq!(load_diagram(&path).unwrap(), d);

    let s = render_stack(&p, &small_window(), 1.0, &[-100.0, 0.0, 150.0], 9).unwrap();
    let path = dir.path().join("s.json");
    save_stack(&path, &s).unwrap();
    assert_eq!(load_stack(&path).unwrap(), s);
    // a single scan loads as a one-slice stack
    assert_eq!(load_stack(&dir.path().join("d.json")).unwrap().slices, vec![d]);
}

#[test]
fn diagram_file_layout() {
    let dir = tempfile::tempdir().unwrap();
    let d = render_diagram(&DeviceParams::reference(), &Window::square(0.0, 10.0, 4.0), 1.0, 5.0, 1).unwrap();
    let path = dir.path().join("d.json");
    save_diagram(&path, &d).unwrap();
    let v: serde_json::Value = load_json(&path).unwrap();
    assert_eq!(v["meta"]["v2_min"], 10.0);
    assert_eq!(v["meta"]["resolution_mv"], 1.0);
    assert_eq!(v["signal"].as_array().unwrap().len(), 4);
    assert_eq!(v["labels"][0].as_array().unwrap().len(), 4);
    assert!(v["labels"][0][0].is_u64());
}

#[test]
fn projection_fingerprint_model_and_result_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = render_diagram(&DeviceParams::reference(), &small_window(), 0.5, 50.0, 2).unwrap();
    let ray = RayConfig::default();
    let proj = acquire_offline(&d, [60.0, 60.0, 50.0], &ray).unwrap();
    let path = dir.path().join("p.json");
    save_json(&path, &ProjectionFile::from(&proj)).unwrap();
    assert_eq!(MProjection::try_from(load_json::<ProjectionFile>(&path).unwrap()).unwrap(), proj);

    let fp = apply_weight(&critical_features(&proj, &PeakConfig::default()), WeightFn::Inv, ray.l_px).unwrap();
    let path = dir.path().join("f.json");
    save_json(&path, &fp).unwrap();
    assert_eq!(load_json::<Fingerprint>(&path).unwrap(), fp);

    let model = MlpModel::init(6, 4).unwrap();
    let path = dir.path().join("m.json");
    save_model(&path, &model).unwrap();
    assert_eq!(load_model(&path).unwrap(), model);

    let fc = FitnessConfig { pinch_offs: DeviceParams::reference().pinch_offs(50.0), ..Default::default() };
    let result = tune(&model, &mut &d, &[60.0, 60.0], &fc, &SimplexConfig::default(), &Pipeline::default()).unwrap();
    let path = dir.path().join("t.json");
    save_json(&path, &result).unwrap();
    assert_eq!(load_json::<rbc_core::autotune::TuneResult>(&path).unwrap(), result);

    let region = SuccessRegion::from_diagram(&d, DeviceState::Dd);
    let path = dir.path().join("r.json");
    save_json(&path, &region).unwrap();
    assert_eq!(load_json::<SuccessRegion>(&path).unwrap(), region);
}

#[test]
fn datasets_are_balanced_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DatasetSpec { n_devices: 3, per_device: 120, seed: 17, ..Default::default() };
    let records = gen_dataset(&spec).unwrap();
    assert_eq!(records.len(), 360);
    let h = class_histogram(&records);
    for &c in &h {
        let share = c as f64 / records.len() as f64;
        assert!((share - 0.2).abs() <= 0.02, "{h:?}");
    }

    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    save_dataset(&a, &records).unwrap();
    save_dataset(&b, &gen_dataset(&spec).unwrap()).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(load_dataset(&a).unwrap(), records);

    let other = gen_dataset(&DatasetSpec { seed: 18, ..spec }).unwrap();
    assert_ne!(other, records);
}
