//! Multi-layer perceptron stance classifier: ReLU hidden layers, softmax over
//! the four stance classes, mean cross-entropy loss, Adam, early stopping on
//! holdout macro F1.
//!
//! Activations are kept column-per-sample (`units × batch`) so each weight
//! matrix is `out × in` and, being column-major, stores one contiguous
//! column per input unit. That makes the sparse first layer a sum of weight
//! columns over the non-zero inputs.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::container::{Container, SectionData};
use crate::corpus::StanceLabel;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::CsrMatrix;
use crate::metrics::evaluate;
use crate::seed;

pub const N_CLASSES: usize = 4;
/// Learning rates at or below this are expected to give a non-increasing
/// training loss on small full-batch problems; epochs where the loss still
/// rises are recorded in [`TrainHistory::loss_increases`].
pub const STABLE_LEARNING_RATE: f64 = 1e-3;
const MODEL_KIND: &str = "mlp-model";
const PREDICT_BLOCK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub dropout_rate: f64,
}

impl MlpConfig {
    /// Six hidden layers of 600 units, no dropout.
    pub fn new(input_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden_sizes: vec![600; 6],
            dropout_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim", "must be positive"));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::config("hidden_sizes", "every layer needs at least one unit"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Input, hidden and output widths in order.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim];
        s.extend(&self.hidden_sizes);
        s.push(N_CLASSES);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// `None` trains on every row for `max_epochs` with no holdout.
    pub early_stop_patience: Option<usize>,
    pub holdout_fraction: f64,
    /// Weight each class by `n / (4 · count)` in the loss.
    pub class_weighting: bool,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 50,
            early_stop_patience: Some(5),
            holdout_fraction: 0.1,
            class_weighting: false,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be positive"));
        }
        if self.early_stop_patience == Some(0) {
            return Err(Error::config("early_stop_patience", "must be positive when set"));
        }
        if self.early_stop_patience.is_some() && !(self.holdout_fraction > 0.0 && self.holdout_fraction <= 0.5) {
            return Err(Error::config("holdout_fraction", "must lie in (0, 0.5]"));
        }
        Ok(())
    }
}

/// One dense layer: `out × in` weights and `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            weights: DMatrix::zeros(n_out, n_in),
            bias: DVector::zeros(n_out),
        }
    }
}

/// Gradients with the same shapes as the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    /// Weight then bias slices, layer by layer.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    config: MlpConfig,
    layers: Vec<Layer>,
    seed: u64,
}

struct Tape {
    /// Post-activation outputs of every hidden layer.
    activations: Vec<DMatrix<f64>>,
    /// d activation / d pre-activation: 0, or 1 / keep-probability.
    gates: Vec<DMatrix<f64>>,
    probs: DMatrix<f64>,
}

impl MlpModel {
    /// He-normal weights, zero biases.
    pub fn init(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "mlp-init"));
        let sizes = config.layer_sizes();
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / n_in as f64).sqrt()).expect("positive std");
                Layer {
                    weights: DMatrix::from_fn(n_out, n_in, |_, _| normal.sample(&mut rng) as f32 as f64),
                    bias: DVector::zeros(n_out),
                }
            })
            .collect();
        Ok(MlpModel { config, layers, seed })
    }

    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let layers = config.layer_sizes().windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(MlpModel {
            config,
            layers,
            seed: 0,
        })
    }

    pub fn from_layers(config: MlpConfig, layers: Vec<Layer>, seed: u64) -> Result<Self> {
        config.validate()?;
        let sizes = config.layer_sizes();
        if layers.len() != sizes.len() - 1 {
            return Err(Error::DimensionMismatch {
                expected: sizes.len() - 1,
                got: layers.len(),
            });
        }
        for (l, w) in layers.iter().zip(sizes.windows(2)) {
            if l.weights.shape() != (w[1], w[0]) || l.bias.len() != w[1] {
                return Err(Error::Format(format!(
                    "layer shape {:?} does not match {} -> {}",
                    l.weights.shape(),
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(MlpModel { config, layers, seed })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Weight then bias slices, layer by layer, in the order of
    /// [`Gradients::slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Class probabilities for one dense input.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; N_CLASSES]> {
        if x.len() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        let mut m = CsrMatrix::new(x.len());
        m.push_dense_row(x)?;
        let probs = self.run(&m, &[0], None, Execution::Sequential).probs;
        Ok(std::array::from_fn(|c| probs[(c, 0)]))
    }

    fn check_input(&self, x: &CsrMatrix) -> Result<()> {
        if x.n_cols() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.n_cols(),
            });
        }
        Ok(())
    }

    /// Forward pass over the given rows of `x`. With a dropout generator,
    /// hidden units are dropped and survivors scaled by 1 / keep.
    fn run(&self, x: &CsrMatrix, rows: &[usize], mut dropout: Option<&mut ChaCha8Rng>, exec: Execution) -> Tape {
        let n = rows.len();
        let first = &self.layers[0];
        let h1 = first.weights.nrows();
        let mut z = DMatrix::<f64>::zeros(h1, n);
        let w1 = first.weights.as_slice();
        let b1 = first.bias.as_slice();
        exec.for_each_chunk_mut(z.as_mut_slice(), h1, |col, out| {
            out.copy_from_slice(b1);
            let (idx, val) = x.row(rows[col]);
            for (&i, &v) in idx.iter().zip(val) {
                let wcol = &w1[i as usize * h1..(i as usize + 1) * h1];
                for (o, w) in out.iter_mut().zip(wcol) {
                    *o += v * w;
                }
            }
        });
        let keep = 1.0 - self.config.dropout_rate;
        let mut activations = Vec::with_capacity(self.layers.len() - 1);
        let mut gates = Vec::with_capacity(self.layers.len() - 1);
        for (li, layer) in self.layers.iter().enumerate() {
            if li > 0 {
                z = &layer.weights * activations.last().expect("hidden layer output");
                for mut col in z.column_iter_mut() {
                    col += &layer.bias;
                }
            }
            if li + 1 == self.layers.len() {
                break;
            }
            let mut gate = z.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
            if let Some(rng) = dropout.as_deref_mut() {
                if keep < 1.0 {
                    for g in gate.iter_mut() {
                        let kept = rng.random::<f64>() < keep;
                        *g = if kept { *g / keep } else { 0.0 };
                    }
                }
            }
            activations.push(z.component_mul(&gate));
            gates.push(gate);
        }
        let mut probs = z;
        for mut col in probs.column_iter_mut() {
            let max = col.max();
            col.apply(|v| *v = (*v - max).exp());
            let s = col.sum();
            col /= s;
        }
        Tape {
            activations,
            gates,
            probs,
        }
    }

    /// Row-wise class probabilities.
    pub fn predict_proba(&self, x: &CsrMatrix, exec: Execution) -> Result<Vec<[f64; N_CLASSES]>> {
        self.check_input(x)?;
        let n_blocks = x.n_rows().div_ceil(PREDICT_BLOCK);
        let blocks = exec.map_range(n_blocks, |b| {
            let rows: Vec<usize> = (b * PREDICT_BLOCK..((b + 1) * PREDICT_BLOCK).min(x.n_rows())).collect();
            let p = self.run(x, &rows, None, Execution::Sequential).probs;
            (0..rows.len())
                .map(|c| std::array::from_fn(|k| p[(k, c)]))
                .collect::<Vec<[f64; N_CLASSES]>>()
        });
        Ok(blocks.into_iter().flatten().collect())
    }

    /// Arg-max class per row; ties go to the earliest class in
    /// agree, disagree, discuss, unrelated order.
    pub fn predict(&self, x: &CsrMatrix, exec: Execution) -> Result<Vec<StanceLabel>> {
        Ok(self.predict_proba(x, exec)?.iter().map(argmax_label).collect())
    }

    /// Mean (optionally class-weighted) cross-entropy and its gradients over
    /// all rows of `x`, dropout disabled.
    pub fn loss_and_gradients(
        &self,
        x: &CsrMatrix,
        labels: &[StanceLabel],
        class_weights: Option<&[f64; N_CLASSES]>,
        exec: Execution,
    ) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        if labels.len() != x.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: x.n_rows(),
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::Empty("gradient batch has no rows".into()));
        }
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        let tape = self.run(x, &rows, None, exec);
        Ok(self.backward(x, &rows, labels, class_weights, &tape, exec))
    }

    fn backward(
        &self,
        x: &CsrMatrix,
        rows: &[usize],
        labels: &[StanceLabel],
        class_weights: Option<&[f64; N_CLASSES]>,
        tape: &Tape,
        exec: Execution,
    ) -> (f64, Gradients) {
        let n = rows.len() as f64;
        let mut g = tape.probs.clone();
        let mut loss = 0.0;
        for (c, &y) in labels.iter().enumerate() {
            let w = class_weights.map_or(1.0, |cw| cw[y.index()]);
            loss -= w * tape.probs[(y.index(), c)].max(f64::MIN_POSITIVE).ln();
            g[(y.index(), c)] -= 1.0;
            g.column_mut(c).scale_mut(w / n);
        }
        loss /= n;

        let depth = self.layers.len();
        let mut grads: Vec<Option<Layer>> = vec![None; depth];
        for li in (1..depth).rev() {
            let prev = &tape.activations[li - 1];
            let weights = &g * prev.transpose();
            let bias = g.column_sum();
            let back = self.layers[li].weights.tr_mul(&g);
            grads[li] = Some(Layer { weights, bias });
            g = back.component_mul(&tape.gates[li - 1]);
        }
        grads[0] = Some(sparse_input_gradient(x, rows, &g, self.config.input_dim, exec));
        (
            loss,
            Gradients {
                layers: grads.into_iter().map(|l| l.expect("every layer visited")).collect(),
            },
        )
    }

    fn round_to_f32(&mut self) {
        for s in self.param_slices_mut() {
            s.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut c = Container::new(MODEL_KIND);
        let cfg = serde_json::to_string(&self.config).map_err(|e| Error::Format(e.to_string()))?;
        c.push_text("config", &cfg)?;
        c.push("seed", &[1], SectionData::U64(vec![self.seed]))?;
        for (i, l) in self.layers.iter().enumerate() {
            let (n_out, n_in) = l.weights.shape();
            let w = l.weights.as_slice().iter().map(|&v| v as f32).collect();
            c.push(format!("layer{i}.weights"), &[n_in, n_out], SectionData::F32(w))?;
            let b = l.bias.iter().map(|&v| v as f32).collect();
            c.push(format!("layer{i}.bias"), &[n_out], SectionData::F32(b))?;
        }
        c.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::load(path, MODEL_KIND)?;
        let config: MlpConfig =
            serde_json::from_str(c.text("config")?).map_err(|e| Error::Format(format!("model config: {e}")))?;
        let seed = c.u64s("seed")?.1.first().copied().unwrap_or_default();
        let sizes = config.layer_sizes();
        let mut layers = Vec::new();
        for (i, w) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let (shape, ws) = c.f32s(&format!("layer{i}.weights"))?;
            if shape != [n_in as u64, n_out as u64] {
                return Err(Error::Format(format!("layer {i} weights have shape {shape:?}")));
            }
            let (_, bs) = c.f32s(&format!("layer{i}.bias"))?;
            if bs.len() != n_out {
                return Err(Error::Format(format!("layer {i} bias has {} values", bs.len())));
            }
            layers.push(Layer {
                weights: DMatrix::from_iterator(n_out, n_in, ws.iter().map(|&v| v as f64)),
                bias: DVector::from_iterator(n_out, bs.iter().map(|&v| v as f64)),
            });
        }
        MlpModel::from_layers(config, layers, seed)
    }
}

pub fn argmax_label(p: &[f64; N_CLASSES]) -> StanceLabel {
    let mut best = 0;
    for c in 1..N_CLASSES {
        if p[c] > p[best] {
            best = c;
        }
    }
    StanceLabel::from_index(best).expect("class index below 4")
}

/// `G Xᵀ` for the sparse input layer, computed per input column so each
/// column's sum runs over batch rows in a fixed order.
fn sparse_input_gradient(x: &CsrMatrix, rows: &[usize], g: &DMatrix<f64>, n_in: usize, exec: Execution) -> Layer {
    let h = g.nrows();
    let mut entries: Vec<(u32, u32, f64)> = Vec::new();
    for (c, &r) in rows.iter().enumerate() {
        let (idx, val) = x.row(r);
        entries.extend(idx.iter().zip(val).map(|(&i, &v)| (i, c as u32, v)));
    }
    entries.sort_by_key(|&(i, c, _)| (i, c));
    let mut start = vec![0usize; n_in + 1];
    for &(i, _, _) in &entries {
        start[i as usize + 1] += 1;
    }
    for i in 0..n_in {
        start[i + 1] += start[i];
    }
    let mut weights = DMatrix::<f64>::zeros(h, n_in);
    let gs = g.as_slice();
    exec.for_each_chunk_mut(weights.as_mut_slice(), h, |i, out| {
        for &(_, c, v) in &entries[start[i]..start[i + 1]] {
            let gc = &gs[c as usize * h..(c as usize + 1) * h];
            for (o, gv) in out.iter_mut().zip(gc) {
                *o += v * gv;
            }
        }
    });
    Layer {
        weights,
        bias: g.column_sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch, measured before each update.
    pub train_loss: f64,
    pub holdout_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Epochs whose training loss exceeded the previous epoch's.
    pub loss_increases: Vec<usize>,
    pub n_train: usize,
    pub n_holdout: usize,
}

impl TrainHistory {
    pub fn is_flagged(&self) -> bool {
        !self.loss_increases.is_empty()
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const UPDATE_CHUNK: usize = 4096;

impl Adam {
    fn new(model: &mut MlpModel) -> Self {
        let shapes: Vec<usize> = model.param_slices_mut().iter().map(|s| s.len()).collect();
        Adam {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64, exec: Execution) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let gs = grads.slices();
        for (((p, g), m), v) in model.param_slices_mut().into_iter().zip(gs).zip(&mut self.m).zip(&mut self.v) {
            exec.zip3_chunks_mut(p, m, v, UPDATE_CHUNK, |off, p, m, v| {
                let g = &g[off..off + p.len()];
                for i in 0..p.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                    p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                }
            });
        }
    }
}

/// Inverse-frequency weights `n / (4 · count)`; absent classes get 0.
pub fn class_weights(labels: &[StanceLabel]) -> [f64; N_CLASSES] {
    let mut counts = [0usize; N_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts.map(|c| if c == 0 { 0.0 } else { labels.len() as f64 / (N_CLASSES * c) as f64 })
}

/// Mini-batch Adam training. With early stopping, a seeded holdout slice is
/// set aside and the weights of the epoch with the best holdout macro F1 are
/// kept. Final parameters are rounded to f32 so a saved model reproduces
/// predictions exactly.
pub fn train(
    features: &CsrMatrix,
    labels: &[StanceLabel],
    mlp: &MlpConfig,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    cfg.validate()?;
    if features.n_rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.n_rows(),
            got: labels.len(),
        });
    }
    if labels.len() < 2 {
        return Err(Error::InvalidArgument("training needs at least two rows".into()));
    }
    let mut model = MlpModel::init(mlp.clone(), cfg.seed)?;
    model.check_input(features)?;

    let mut order: Vec<usize> = (0..labels.len()).collect();
    let (train_rows, holdout_rows) = match cfg.early_stop_patience {
        Some(_) => {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, "mlp-holdout")));
            let n_hold = ((labels.len() as f64 * cfg.holdout_fraction).floor() as usize).max(1);
            let (h, t) = order.split_at(n_hold);
            let (mut t, mut h) = (t.to_vec(), h.to_vec());
            t.sort_unstable();
            h.sort_unstable();
            (t, h)
        }
        None => (order, Vec::new()),
    };
    let train_labels: Vec<StanceLabel> = train_rows.iter().map(|&r| labels[r]).collect();
    let first = train_labels[0];
    if train_labels.iter().all(|&l| l == first) {
        return Err(Error::InvalidArgument(format!(
            "training rows all carry the single label {first}"
        )));
    }
    let weights = cfg.class_weighting.then(|| class_weights(&train_labels));
    let holdout_x = features.select_rows(&holdout_rows);
    let holdout_gold: Vec<StanceLabel> = holdout_rows.iter().map(|&r| labels[r]).collect();

    let mut adam = Adam::new(&mut model);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, "mlp-shuffle"));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, "mlp-dropout"));
    let use_dropout = mlp.dropout_rate > 0.0;
    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
        loss_increases: Vec::new(),
        n_train: train_rows.len(),
        n_holdout: holdout_rows.len(),
    };
    let mut best: Option<(f64, Vec<Layer>)> = None;
    let mut since_best = 0;
    let mut rows = train_rows.clone();
    for epoch in 1..=cfg.max_epochs {
        rows.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in rows.chunks(cfg.batch_size) {
            let batch_labels: Vec<StanceLabel> = batch.iter().map(|&r| labels[r]).collect();
            let tape = model.run(
                features,
                batch,
                use_dropout.then_some(&mut dropout_rng),
                cfg.execution,
            );
            let (loss, grads) = model.backward(
                features,
                batch,
                &batch_labels,
                weights.as_ref(),
                &tape,
                cfg.execution,
            );
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("training loss became {loss} in epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut model, &grads, cfg.learning_rate, cfg.execution);
        }
        let train_loss = loss_sum / rows.len() as f64;
        if let Some(prev) = history.epochs.last() {
            if train_loss > prev.train_loss {
                history.loss_increases.push(epoch);
            }
        }
        let holdout_macro_f1 = match cfg.early_stop_patience {
            Some(_) => {
                let pred = model.predict(&holdout_x, cfg.execution)?;
                Some(evaluate(&holdout_gold, &pred)?.macro_f1)
            }
            None => None,
        };
        log::debug!("epoch {epoch}: loss {train_loss:.6} holdout F1m {holdout_macro_f1:?}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            holdout_macro_f1,
        });
        if let (Some(patience), Some(f1)) = (cfg.early_stop_patience, holdout_macro_f1) {
            if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
                best = Some((f1, model.layers.clone()));
                history.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    history.stopped_early = true;
                    break;
                }
            }
        } else {
            history.best_epoch = epoch;
        }
    }
    if let Some((_, layers)) = best {
        model.layers = layers;
    }
    model.round_to_f32();
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use StanceLabel::*;

    fn tiny_config(input: usize, hidden: &[usize]) -> MlpConfig {
        MlpConfig {
            input_dim: input,
            hidden_sizes: hidden.to_vec(),
            dropout_rate: 0.0,
        }
    }

    #[test]
    fn zero_model_is_uniform_and_ties_go_to_agree() {
        let m = MlpModel::zeros(tiny_config(3, &[2])).unwrap();
        let p = m.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        assert_eq!(argmax_label(&p), Agree);
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn hand_set_network() {
        // 2 inputs -> 2 hidden -> 4 outputs.
        let cfg = tiny_config(2, &[2]);
        let l1 = Layer {
            weights: DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.5, 2.0]),
            bias: DVector::from_vec(vec![0.0, -1.0]),
        };
        let l2 = Layer {
            weights: DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 1.0, 0.5, 0.5]),
            bias: DVector::from_vec(vec![0.1, 0.0, 0.0, -0.1]),
        };
        let m = MlpModel::from_layers(cfg, vec![l1, l2], 0).unwrap();
        // x = [2, 1]: hidden pre = [1, 1 + 2 - 1] = [1, 2]; relu keeps both.
        // logits = [1.1, 2, 1, 1.4]
        let logits = [1.1f64, 2.0, 1.0, 1.4];
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        let p = m.forward(&[2.0, 1.0]).unwrap();
        for c in 0..4 {
            assert!((p[c] - logits[c].exp() / z).abs() < 1e-12);
        }
        assert_eq!(argmax_label(&p), Disagree);
        // x = [-1, 0]: hidden pre = [-1, -1.5] -> relu zero -> logits = bias.
        let p = m.forward(&[-1.0, 0.0]).unwrap();
        assert_eq!(argmax_label(&p), Agree);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = MlpModel::init(tiny_config(5, &[7, 3]), 9).unwrap();
        let p = m.forward(&[100.0, -3.0, 0.0, 2.0, 1e3]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn duplicated_rows_leave_gradient_unchanged() {
        let m = MlpModel::init(tiny_config(4, &[5, 5]), 1).unwrap();
        let rows = vec![vec![0.5, -1.0, 0.0, 2.0], vec![1.0, 0.0, 0.3, -0.2]];
        let x = CsrMatrix::from_dense_rows(4, &rows).unwrap();
        let doubled = CsrMatrix::from_dense_rows(4, &[rows.clone(), rows].concat()).unwrap();
        let (l1, g1) = m.loss_and_gradients(&x, &[Agree, Unrelated], None, Execution::Sequential).unwrap();
        let (l2, g2) = m
            .loss_and_gradients(&doubled, &[Agree, Unrelated, Agree, Unrelated], None, Execution::Sequential)
            .unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.slices().iter().zip(g2.slices()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn saturated_softmax_has_vanishing_gradient() {
        let mut m = MlpModel::init(tiny_config(3, &[4]), 2).unwrap();
        m.layers[1].weights.fill(0.0);
        m.layers[1].bias[2] = 60.0;
        let x = CsrMatrix::from_dense_rows(3, &[vec![1.0, 2.0, 3.0], vec![0.0, -1.0, 0.5]]).unwrap();
        let (loss, g) = m.loss_and_gradients(&x, &[Discuss, Discuss], None, Execution::Sequential).unwrap();
        assert!(loss < 1e-20);
        assert!(g.norm() < 1e-6);
    }

    #[test]
    fn save_load_round_trip() {
        let x = CsrMatrix::from_dense_rows(3, &[vec![1.0, 0.0, 2.0], vec![0.0, 1.0, 0.0], vec![3.0, 1.0, 0.0]])
            .unwrap();
        let labels = [Agree, Discuss, Unrelated];
        let cfg = TrainConfig {
            max_epochs: 3,
            early_stop_patience: None,
            batch_size: 2,
            ..Default::default()
        };
        let (m, _) = train(&x, &labels, &tiny_config(3, &[6, 6]), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        m.save(&path).unwrap();
        let back = MlpModel::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            back.predict_proba(&x, Execution::Sequential).unwrap(),
            m.predict_proba(&x, Execution::Sequential).unwrap()
        );
    }

    #[test]
    fn single_class_training_set_is_rejected() {
        let x = CsrMatrix::from_dense_rows(1, &[vec![1.0], vec![2.0]]).unwrap();
        let cfg = TrainConfig {
            early_stop_patience: None,
            ..Default::default()
        };
        assert!(train(&x, &[Agree, Agree], &tiny_config(1, &[2]), &cfg).is_err());
    }

    #[test]
    fn class_weights_are_inverse_frequency() {
        let w = class_weights(&[Agree, Agree, Agree, Unrelated]);
        assert_eq!(w, [4.0 / 12.0, 0.0, 0.0, 1.0]);
    }
}
