//! Dense fingerprint classifier: `M -> 128 -> 64 -> 32 -> 5` with ReLU and softmax.
//!
//! Training minimizes categorical cross-entropy against one-hot labels with
//! mini-batch Adam. Everything is deterministic given the seeds in
//! [`TrainConfig`].

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{RbcError, Result};
use crate::fingerprint::{Fingerprint, FingerprintRecord};
use crate::qdsim::DeviceState;
use crate::seed;

pub const HIDDEN: [usize; 3] = [128, 64, 32];
pub const CLASSES: usize = DeviceState::COUNT;
pub const MODEL_VERSION: u32 = 1;

/// Probabilities over `[ND, SD_L, SD_C, SD_R, DD]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(pub [f64; CLASSES]);

impl ProbabilityVector {
    pub fn one_hot(state: DeviceState) -> Self {
        let mut p = [0.0; CLASSES];
        p[state.index()] = 1.0;
        Self(p)
    }

    pub fn uniform() -> Self {
        Self([1.0 / CLASSES as f64; CLASSES])
    }

    /// Softmax of raw logits.
    pub fn from_logits(logits: &[f64]) -> Self {
        let mut p = [0.0; CLASSES];
        softmax_into(logits, &mut p);
        Self(p)
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.0.iter().sum();
        if self.0.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(RbcError::Contract(format!("not a probability vector: {:?}", self.0)));
        }
        Ok(())
    }

    /// Most likely state, lowest index on ties.
    pub fn argmax(&self) -> DeviceState {
        DeviceState::from_index(argmax(&self.0)).unwrap()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Fully connected layer; `w` is `d_out x d_in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub d_in: usize,
    pub d_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(d_in: usize, d_out: usize) -> Self {
        Self { d_in, d_out, w: vec![0.0; d_in * d_out], b: vec![0.0; d_out] }
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// `out[n x d_out] = inp[n x d_in] * W^T + b`
    fn forward(&self, inp: &[f64], n: usize, out: &mut [f64]) {
        let (d_in, d_out) = (self.d_in, self.d_out);
        let mut r = 0;
        // four rows at a time share each weight row load
        while r + 4 <= n {
            let x = [
                &inp[r * d_in..(r + 1) * d_in],
                &inp[(r + 1) * d_in..(r + 2) * d_in],
                &inp[(r + 2) * d_in..(r + 3) * d_in],
                &inp[(r + 3) * d_in..(r + 4) * d_in],
            ];
            for o in 0..d_out {
                let s = dot4(&self.w[o * d_in..(o + 1) * d_in], x);
                for (k, sk) in s.iter().enumerate() {
                    out[(r + k) * d_out + o] = self.b[o] + sk;
                }
            }
            r += 4;
        }
        for r in r..n {
            let x = &inp[r * d_in..(r + 1) * d_in];
            for o in 0..d_out {
                out[r * d_out + o] = self.b[o] + dot(&self.w[o * d_in..(o + 1) * d_in], x);
            }
        }
    }
}

fn dot4(w: &[f64], x: [&[f64]; 4]) -> [f64; 4] {
    let mut acc = [[0.0; 4]; 4];
    let wc = w.chunks_exact(4);
    let tail = wc.remainder().len();
    for (c, wk) in wc.enumerate() {
        for j in 0..4 {
            let xk = &x[j][4 * c..4 * c + 4];
            for k in 0..4 {
                acc[j][k] += wk[k] * xk[k];
            }
        }
    }
    let mut out = [0.0; 4];
    let n = w.len();
    for j in 0..4 {
        out[j] = (acc[j][0] + acc[j][1]) + (acc[j][2] + acc[j][3]);
        for i in n - tail..n {
            out[j] += w[i] * x[j][i];
        }
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // independent accumulators let the compiler vectorize the reduction
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
}

/// Scratch buffers for batched passes.
#[derive(Default)]
struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn fit(&mut self, model: &MlpModel, n: usize) {
        let dims = model.layer_dims();
        self.acts.resize(dims.len(), Vec::new());
        self.deltas.resize(dims.len(), Vec::new());
        for (k, &d) in dims.iter().enumerate() {
            self.acts[k].resize(n * d, 0.0);
            self.deltas[k].resize(n * d, 0.0);
        }
    }
}

impl MlpModel {
    /// He-initialized network with the standard hidden widths.
    pub fn init(m: usize, seed: u64) -> Result<Self> {
        if m < 3 {
            return Err(RbcError::Config(format!("need at least 3 inputs, got {m}")));
        }
        let mut dims = vec![m];
        dims.extend(HIDDEN);
        dims.push(CLASSES);
        Ok(Self::with_dims(&dims, seed))
    }

    /// He-initialized network with arbitrary layer widths.
    pub fn with_dims(dims: &[usize], seed: u64) -> Self {
        let mut rng = seed::rng(seed, "init", 0);
        let layers = dims
            .windows(2)
            .map(|d| {
                let mut layer = Layer::zeros(d[0], d[1]);
                let std = (2.0 / d[0] as f64).sqrt();
                for w in layer.w.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *w = std * z;
                }
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self { layers: dims.windows(2).map(|d| Layer::zeros(d[0], d[1])).collect() }
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].d_in];
        dims.extend(self.layers.iter().map(|l| l.d_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].d_in
    }

    pub fn count_params(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn forward_batch(&self, x: &[f64], n: usize, ws: &mut Workspace) {
        ws.fit(self, n);
        ws.acts[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let out = &mut tail[0];
            layer.forward(&head[l], n, out);
            if l < last {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
    }

    /// Output logits for one input vector.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(RbcError::Dimension { expected: self.input_dim(), got: x.len() });
        }
        let mut ws = Workspace::default();
        self.forward_batch(x, 1, &mut ws);
        Ok(ws.acts.pop().unwrap())
    }

    pub fn predict(&self, x: &[f64]) -> Result<ProbabilityVector> {
        Ok(ProbabilityVector::from_logits(&self.logits(x)?))
    }

    pub fn forward(&self, f: &Fingerprint) -> Result<ProbabilityVector> {
        self.predict(&f.values)
    }

    /// Mean cross-entropy over a batch and its gradient, shaped like the model.
    pub fn loss_and_grad(&self, x: &[f64], y: &[usize]) -> (f64, MlpModel) {
        let mut ws = Workspace::default();
        let mut grad = MlpModel::zeros(&self.layer_dims());
        let loss = self.backprop(x, y, &mut ws, &mut grad);
        (loss, grad)
    }

    /// Mean cross-entropy over a batch without gradients.
    pub fn loss(&self, x: &[f64], y: &[usize]) -> f64 {
        let mut ws = Workspace::default();
        let n = y.len();
        self.forward_batch(x, n, &mut ws);
        let logits = ws.acts.last().unwrap();
        let mut p = [0.0; CLASSES];
        (0..n)
            .map(|r| {
                softmax_into(&logits[r * CLASSES..(r + 1) * CLASSES], &mut p);
                -p[y[r]].max(f64::MIN_POSITIVE).ln()
            })
            .sum::<f64>()
            / n as f64
    }

    fn backprop(&self, x: &[f64], y: &[usize], ws: &mut Workspace, grad: &mut MlpModel) -> f64 {
        let n = y.len();
        self.forward_batch(x, n, ws);
        let depth = self.layers.len();
        let mut loss = 0.0;
        {
            let logits = &ws.acts[depth];
            let delta = &mut ws.deltas[depth];
            for r in 0..n {
                let row = &mut delta[r * CLASSES..(r + 1) * CLASSES];
                softmax_into(&logits[r * CLASSES..(r + 1) * CLASSES], row);
                loss -= row[y[r]].max(f64::MIN_POSITIVE).ln();
                row[y[r]] -= 1.0;
                for v in row.iter_mut() {
                    *v /= n as f64;
                }
            }
        }
        for g in grad.layers.iter_mut() {
            g.w.fill(0.0);
            g.b.fill(0.0);
        }
        for l in (0..depth).rev() {
            let layer = &self.layers[l];
            let g = &mut grad.layers[l];
            let (d_in, d_out) = (layer.d_in, layer.d_out);
            let (lower, upper) = ws.deltas.split_at_mut(l + 1);
            let delta = &upper[0];
            let inp = &ws.acts[l];
            // output-major so each gradient row stays hot in cache
            for o in 0..d_out {
                let row = &mut g.w[o * d_in..(o + 1) * d_in];
                for r in 0..n {
                    let d = delta[r * d_out + o];
                    if d != 0.0 {
                        axpy(d, &inp[r * d_in..(r + 1) * d_in], row);
                        g.b[o] += d;
                    }
                }
            }
            if l > 0 {
                let prev = &mut lower[l];
                prev.fill(0.0);
                for r in 0..n {
                    let dr = &delta[r * d_out..(r + 1) * d_out];
                    let pr = &mut prev[r * d_in..(r + 1) * d_in];
                    for (&d, w) in dr.iter().zip(layer.w.chunks_exact(d_in)) {
                        if d != 0.0 {
                            axpy(d, w, pr);
                        }
                    }
                    // ReLU mask from the post-activation
                    for (p, &a) in pr.iter_mut().zip(&inp[r * d_in..(r + 1) * d_in]) {
                        if a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
            }
        }
        loss / n as f64
    }

    /// All parameters as one flat vector, layer by layer (weights, then biases).
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied()).collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.count_params());
        let mut k = 0;
        for l in self.layers.iter_mut() {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = flat[k];
                k += 1;
            }
        }
    }
}

/// File form of a model: weight matrices as arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub m: usize,
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: String,
    pub version: u32,
}

impl From<&MlpModel> for ModelFile {
    fn from(model: &MlpModel) -> Self {
        Self {
            m: model.input_dim(),
            layer_dims: model.layer_dims(),
            weights: model.layers.iter().map(|l| l.w.chunks(l.d_in).map(<[f64]>::to_vec).collect()).collect(),
            biases: model.layers.iter().map(|l| l.b.clone()).collect(),
            activation: "relu".into(),
            version: MODEL_VERSION,
        }
    }
}

impl TryFrom<ModelFile> for MlpModel {
    type Error = RbcError;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.activation != "relu" {
            return Err(RbcError::Config(format!("unsupported activation `{}`", f.activation)));
        }
        if f.layer_dims.len() < 2 || f.layer_dims[0] != f.m || *f.layer_dims.last().unwrap() != CLASSES {
            return Err(RbcError::Config("inconsistent layer dimensions".into()));
        }
        let n = f.layer_dims.len() - 1;
        if f.weights.len() != n || f.biases.len() != n {
            return Err(RbcError::Dimension { expected: n, got: f.weights.len() });
        }
        let mut layers = Vec::with_capacity(n);
        for (k, (w, b)) in f.weights.into_iter().zip(f.biases).enumerate() {
            let (d_in, d_out) = (f.layer_dims[k], f.layer_dims[k + 1]);
            if w.len() != d_out || w.iter().any(|r| r.len() != d_in) || b.len() != d_out {
                return Err(RbcError::Config(format!("layer {k} does not match {d_in}x{d_out}")));
            }
            layers.push(Layer { d_in, d_out, w: w.concat(), b });
        }
        Ok(MlpModel { layers })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
    /// Fraction of records held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 64, learning_rate: 1e-3, lr_decay: 1.0, seed: 0, val_fraction: 0.1 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(RbcError::Config("epochs and batch size must be >= 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(RbcError::Config("validation fraction must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.lr_decay > 0.0) {
            return Err(RbcError::Config("learning rate and decay must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss over the mini-batches of each epoch.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Loss of the untrained model on the training split.
    pub initial_loss: f64,
}

/// Flat design matrix with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub m: usize,
    pub x: Vec<f64>,
    pub y: Vec<usize>,
}

impl Design {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    /// Checks that all records share one ray configuration and weight.
    pub fn from_records(records: &[FingerprintRecord]) -> Result<Self> {
        let first = records.first().ok_or(RbcError::Empty("fingerprint dataset"))?;
        let mut x = Vec::with_capacity(records.len() * first.m);
        let mut y = Vec::with_capacity(records.len());
        for r in records {
            if (r.m, r.l_px, r.weight_id) != (first.m, first.l_px, first.weight_id) || r.px_mv != first.px_mv {
                return Err(RbcError::Config(format!(
                    "mixed dataset: ({}, {}, {}) vs ({}, {}, {})",
                    r.m, r.l_px, r.weight_id, first.m, first.l_px, first.weight_id
                )));
            }
            if r.values.len() != r.m {
                return Err(RbcError::Dimension { expected: r.m, got: r.values.len() });
            }
            if r.label >= CLASSES {
                return Err(RbcError::Contract(format!("label {} out of range", r.label)));
            }
            x.extend_from_slice(&r.values);
            y.push(r.label);
        }
        Ok(Self { m: first.m, x, y })
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut x = Vec::with_capacity(idx.len() * self.m);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Self { m: self.m, x, y: idx.iter().map(|&i| self.y[i]).collect() }
    }
}

/// Disjoint `(train, validation)` index sets, reproducible from `seed`.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed, "split", 0));
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n.saturating_sub(1));
    let val = idx[..n_val].to_vec();
    let train = idx[n_val..].to_vec();
    (train, val)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, model: &mut MlpModel, grad: &MlpModel, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let mut k = 0;
        for (layer, g) in model.layers.iter_mut().zip(&grad.layers) {
            for (p, &gi) in layer.w.iter_mut().chain(layer.b.iter_mut()).zip(g.w.iter().chain(&g.b)) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = Self::B1 * *m + (1.0 - Self::B1) * gi;
                *v = Self::B2 * *v + (1.0 - Self::B2) * gi * gi;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                k += 1;
            }
        }
    }
}

pub fn accuracy(model: &MlpModel, data: &Design) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = (0..data.len())
        .filter(|&i| model.predict(data.row(i)).map(|p| p.argmax().index() == data.y[i]).unwrap_or(false))
        .count();
    correct as f64 / data.len() as f64
}

/// Trains on labeled fingerprint records; all records must share `(M, L_px, weight)`.
pub fn train(model: MlpModel, records: &[FingerprintRecord], cfg: &TrainConfig) -> Result<(MlpModel, TrainHistory)> {
    if records.len() < 100 {
        return Err(RbcError::Config(format!("need at least 100 records, got {}", records.len())));
    }
    let data = Design::from_records(records)?;
    train_design(model, &data, cfg)
}

pub fn train_design(mut model: MlpModel, data: &Design, cfg: &TrainConfig) -> Result<(MlpModel, TrainHistory)> {
    cfg.validate()?;
    if data.m != model.input_dim() {
        return Err(RbcError::Dimension { expected: model.input_dim(), got: data.m });
    }
    let (train_idx, val_idx) = split_indices(data.len(), cfg.val_fraction, cfg.seed);
    let train_set = data.subset(&train_idx);
    let val_set = data.subset(&val_idx);

    let mut history = TrainHistory { initial_loss: model.loss(&train_set.x, &train_set.y), ..Default::default() };
    let mut adam = Adam::new(model.count_params());
    let mut grad = MlpModel::zeros(&model.layer_dims());
    let mut ws = Workspace::default();
    let mut rng = seed::rng(cfg.seed, "shuffle", 0);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut bx = Vec::with_capacity(cfg.batch_size * data.m);
    let mut by = Vec::with_capacity(cfg.batch_size);
    let mut lr = cfg.learning_rate;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(train_set.row(i));
                by.push(train_set.y[i]);
            }
            total += model.backprop(&bx, &by, &mut ws, &mut grad);
            batches += 1;
            adam.step(&mut model, &grad, lr);
        }
        history.train_loss.push(total / batches as f64);
        history.val_loss.push(model.loss(&val_set.x, &val_set.y));
        history.val_accuracy.push(accuracy(&model, &val_set));
        lr *= cfg.lr_decay;
    }
    Ok((model, history))
}

/// Accuracy summary of a model ensemble on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `accuracies`.
    pub std: f64,
    /// `confusion[true][predicted]`, summed over all models.
    pub confusion: [[u64; CLASSES]; CLASSES],
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn evaluate_ensemble(models: &[MlpModel], test: &[FingerprintRecord]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(RbcError::Empty("test set"));
    }
    evaluate_design(models, &Design::from_records(test)?)
}

pub fn evaluate_design(models: &[MlpModel], test: &Design) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(RbcError::Empty("test set"));
    }
    if models.is_empty() {
        return Err(RbcError::Empty("model ensemble"));
    }
    let mut confusion = [[0u64; CLASSES]; CLASSES];
    let mut accuracies = Vec::with_capacity(models.len());
    for model in models {
        if model.input_dim() != test.m {
            return Err(RbcError::Dimension { expected: model.input_dim(), got: test.m });
        }
        let mut correct = 0;
        for i in 0..test.len() {
            let pred = model.predict(test.row(i))?.argmax().index();
            confusion[test.y[i]][pred] += 1;
            correct += usize::from(pred == test.y[i]);
        }
        accuracies.push(correct as f64 / test.len() as f64);
    }
    let (mean, std) = mean_std(&accuracies);
    Ok(EvalReport { accuracies, mean, std, confusion })
}

/// Ensemble member `k` trained with init and shuffle seeds derived from `(root, k)`.
pub fn train_member(data: &Design, cfg: &TrainConfig, root: u64, k: usize) -> Result<(MlpModel, TrainHistory)> {
    let init_seed = seed::derive(root, "init", k as u64);
    let cfg = TrainConfig { seed: seed::derive(root, "train", k as u64), ..*cfg };
    train_design(MlpModel::init(data.m, init_seed)?, data, &cfg)
}
