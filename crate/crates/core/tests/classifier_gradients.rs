use rand::Rng;
use rbc_core::classifier::{accuracy, train_design, Design, MlpModel, TrainConfig};
use rbc_core::seed;

/// Central differences of the forward-only loss, one parameter at a time.
fn numeric_grad(model: &MlpModel, x: &[f64], y: &[usize], h: f64) -> Vec<f64> {
    let base = model.params();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut p = base.clone();
    for k in 0..base.len() {
        p[k] = base[k] + h;
        probe.set_params(&p);
        let up = probe.loss(x, y);
        p[k] = base[k] - h;
        probe.set_params(&p);
        let down = probe.loss(x, y);
        p[k] = base[k];
        out.push((up - down) / (2.0 * h));
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn backprop_matches_finite_differences() {
    for trial in 0..25u64 {
        // random biases too: zero biases behind a dead layer put every
        // pre-activation exactly on the ReLU kink
        let mut model = MlpModel::with_dims(&[4, 8, 8, 8, 5], 100 + trial);
        let mut rng = seed::rng(trial, "gradcheck", 0);
        let p: Vec<f64> = model.params().iter().map(|w| w + rng.random_range(-0.3..0.3)).collect();
        model.set_params(&p);
        let n = 7;
        let x: Vec<f64> = (0..n * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();

        let (loss, grad) = model.loss_and_grad(&x, &y);
        assert!((loss - model.loss(&x, &y)).abs() < 1e-12);
        let analytic = grad.params();
        // small step: a wider one straddles ReLU kinks of near-zero units
        let numeric = numeric_grad(&model, &x, &y, 1e-7);
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / (norm(&analytic) + norm(&numeric));
        assert!(rel < 1e-4, "trial {trial}: relative error {rel:e}");
    }
}

#[test]
fn separable_toy_problem_is_learned() {
    // two classes split by the sign of x0 + x1 - x2, with a margin
    let mut rng = seed::rng(5, "toy", 0);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while y.len() < 400 {
        let p: [f64; 3] = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let s = p[0] + p[1] - p[2] - 0.5;
        if s.abs() < 0.05 {
            continue;
        }
        x.extend_from_slice(&p);
        y.push(if s > 0.0 { 4 } else { 0 });
    }
    let data = Design { m: 3, x, y };
    let cfg = TrainConfig { epochs: 50, seed: 1, ..Default::default() };
    let (model, hist) = train_design(MlpModel::init(3, 2).unwrap(), &data, &cfg).unwrap();
    assert!(*hist.train_loss.last().unwrap() < hist.initial_loss);
    assert!(accuracy(&model, &data) >= 0.99, "accuracy {}", accuracy(&model, &data));

    let again = train_design(MlpModel::init(3, 2).unwrap(), &data, &cfg).unwrap();
    assert_eq!(again.0, model);
}
