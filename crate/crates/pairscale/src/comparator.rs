//! The preference comparator: a Siamese feature backbone, an odd hub layer,
//! and a sigmoid head, trained with a comparison-count-weighted binary
//! cross-entropy loss and hand-derived gradients.
//!
//! Both items of a pair pass through the same backbone `B`. The hub maps the
//! embedding difference `V = B(x_i) - B(x_j)` through an odd function
//! `H(V) = ½(F(V) - F(-V))` with `F` affine, which collapses algebraically to
//! `H(V) = w·V`: the hub bias provably cancels and the prediction satisfies
//! `M(i,j) = 1 - M(j,i)` by construction. Everything runs in f64 so the
//! finite-difference gradient checker can be held to tight tolerances.

use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::derive_seed;

#[derive(Debug, Error)]
pub enum ComparatorError {
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("layer {index} expects input dim {expected}, previous layer produces {got}")]
    LayerChainMismatch { index: usize, expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("no training records left after thresholding at {threshold}")]
    EmptyTrainingSet { threshold: f64 },
    #[error("record references item {index} but only {n} feature vectors were supplied")]
    BadItemIndex { index: usize, n: usize },
    #[error("record has non-positive comparison count {0}")]
    BadCount(f64),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// One affine backbone layer with a pointwise activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` weight matrix.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn apply(&self, input: &[f64], output: &mut Vec<f64>) {
        output.clear();
        for r in 0..self.rows {
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.bias[r];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            output.push(match self.activation {
                Activation::Relu => acc.max(0.0),
                Activation::Identity => acc,
            });
        }
    }
}

/// The comparator: backbone layers chaining feature dim `d` to embedding dim
/// `e`, plus the scalar hub. `hub_bias` is stored for checkpoint fidelity but
/// never enters the forward pass (the odd hub construction cancels it).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorModel {
    pub layers: Vec<Layer>,
    pub hub_weight: Vec<f64>,
    pub hub_bias: f64,
}

impl ComparatorModel {
    /// Seeded Xavier-uniform initialization. `dims` lists the feature dim
    /// followed by each layer's output dim; hidden layers get ReLU and the
    /// last layer is linear. A single-element `dims` yields a hub-only model
    /// acting directly on the features.
    pub fn init(dims: &[usize], seed: u64) -> Self {
        assert!(!dims.is_empty(), "dims must at least name the feature dimension");
        assert!(dims.iter().all(|&d| d > 0), "dims must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for k in 1..dims.len() {
            let (cols, rows) = (dims[k - 1], dims[k]);
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let weight =
                (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect::<Vec<_>>();
            // Small random biases keep ReLU pre-activations away from exact
            // zero even when a unit's inputs all die.
            let bias = (0..rows).map(|_| rng.random_range(-0.1..0.1)).collect();
            let activation =
                if k + 1 == dims.len() { Activation::Identity } else { Activation::Relu };
            layers.push(Layer { rows, cols, weight, bias, activation });
        }
        let e = *dims.last().unwrap();
        let bound = (6.0 / (e + 1) as f64).sqrt();
        let hub_weight = (0..e).map(|_| rng.random_range(-bound..bound)).collect();
        Self { layers, hub_weight, hub_bias: 0.0 }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(self.hub_weight.len(), |l| l.cols)
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().map_or(self.hub_weight.len(), |l| l.rows)
    }

    /// Checks that layer dimensions chain consistently into the hub.
    pub fn check_shape(&self) -> Result<(), ComparatorError> {
        let mut dim = self.input_dim();
        for (index, layer) in self.layers.iter().enumerate() {
            if layer.cols != dim {
                return Err(ComparatorError::LayerChainMismatch {
                    index,
                    expected: layer.cols,
                    got: dim,
                });
            }
            dim = layer.rows;
        }
        if dim != self.hub_weight.len() {
            return Err(ComparatorError::DimensionMismatch {
                expected: dim,
                got: self.hub_weight.len(),
            });
        }
        Ok(())
    }

    /// Backbone embedding of one feature vector.
    pub fn embed(&self, features: &[f64]) -> Vec<f64> {
        let mut current = features.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.apply(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    /// Embedding with all intermediate activations, input first.
    fn embed_trace(&self, features: &[f64]) -> Vec<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(features.to_vec());
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.apply(trace.last().unwrap(), &mut next);
            trace.push(next.clone());
        }
        trace
    }

    /// The odd hub: `H(V) = ½(F(V) - F(-V)) = w·V` for affine `F`, so the
    /// stored bias never influences the output.
    pub fn hub(&self, v: &[f64]) -> f64 {
        self.hub_weight.iter().zip(v).map(|(w, x)| w * x).sum()
    }

    /// Preference probability that item `i` beats item `j`.
    pub fn forward(&self, feat_i: &[f64], feat_j: &[f64]) -> Result<f64, ComparatorError> {
        let d = self.input_dim();
        if feat_i.len() != d {
            return Err(ComparatorError::DimensionMismatch { expected: d, got: feat_i.len() });
        }
        if feat_j.len() != d {
            return Err(ComparatorError::DimensionMismatch { expected: d, got: feat_j.len() });
        }
        let zi = self.embed(feat_i);
        let zj = self.embed(feat_j);
        let v: Vec<f64> = zi.iter().zip(&zj).map(|(a, b)| a - b).collect();
        Ok(sigmoid(self.hub(&v)))
    }

    pub fn param_count(&self) -> usize {
        let backbone: usize = self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum();
        backbone + self.hub_weight.len() + 1
    }

    /// Index of the first hub parameter in the flat layout.
    pub fn hub_offset(&self) -> usize {
        self.param_count() - self.hub_weight.len() - 1
    }

    pub fn param(&self, mut k: usize) -> f64 {
        for layer in &self.layers {
            if k < layer.weight.len() {
                return layer.weight[k];
            }
            k -= layer.weight.len();
            if k < layer.bias.len() {
                return layer.bias[k];
            }
            k -= layer.bias.len();
        }
        if k < self.hub_weight.len() {
            return self.hub_weight[k];
        }
        self.hub_bias
    }

    pub fn set_param(&mut self, mut k: usize, value: f64) {
        for layer in &mut self.layers {
            if k < layer.weight.len() {
                layer.weight[k] = value;
                return;
            }
            k -= layer.weight.len();
            if k < layer.bias.len() {
                layer.bias[k] = value;
                return;
            }
            k -= layer.bias.len();
        }
        if k < self.hub_weight.len() {
            self.hub_weight[k] = value;
            return;
        }
        self.hub_bias = value;
    }

    pub fn save(&self, path: &Path) -> Result<(), ComparatorError> {
        self.save_with_config(path, None)
    }

    /// Writes the checkpoint, optionally echoing the training configuration.
    pub fn save_with_config(
        &self,
        path: &Path,
        train_config: Option<&TrainConfig>,
    ) -> Result<(), ComparatorError> {
        let file = CheckpointFile {
            format_version: crate::FORMAT_VERSION.to_string(),
            input_dim: self.input_dim(),
            embedding_dim: self.embedding_dim(),
            layers: self
                .layers
                .iter()
                .map(|l| CheckpointLayer {
                    rows: l.rows,
                    cols: l.cols,
                    activation: l.activation,
                    weight: l.weight.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
            hub_weight: self.hub_weight.clone(),
            hub_bias: self.hub_bias,
            train_config: train_config.cloned(),
        };
        let text = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
        std::fs::write(path, text + "\n")
            .map_err(|source| ComparatorError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ComparatorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ComparatorError::Io { path: path.display().to_string(), source })?;
        let file: CheckpointFile =
            serde_json::from_str(&text).map_err(|e| ComparatorError::Checkpoint {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        let model = Self {
            layers: file
                .layers
                .into_iter()
                .map(|l| Layer {
                    rows: l.rows,
                    cols: l.cols,
                    weight: l.weight,
                    bias: l.bias,
                    activation: l.activation,
                })
                .collect(),
            hub_weight: file.hub_weight,
            hub_bias: file.hub_bias,
        };
        model.check_shape().map_err(|e| ComparatorError::Checkpoint {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: String,
    input_dim: usize,
    embedding_dim: usize,
    layers: Vec<CheckpointLayer>,
    hub_weight: Vec<f64>,
    hub_bias: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_config: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    rows: usize,
    cols: usize,
    activation: Activation,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One training observation: indices into a feature table, the empirical
/// preference probability of `i` over `j`, and the comparison count behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairObservation {
    pub i: usize,
    pub j: usize,
    pub p: f64,
    pub n: f64,
}

impl PairObservation {
    pub fn flipped(&self) -> Self {
        Self { i: self.j, j: self.i, p: 1.0 - self.p, n: self.n }
    }
}

/// A batch with its unique-item cache: each distinct item's features appear
/// exactly once no matter how many records reference them.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    /// Records with `i`/`j` remapped to cache slots.
    pub records: Vec<PairObservation>,
    /// Unique feature vectors, indexed by slot.
    pub items: Vec<Vec<f64>>,
    /// Slot to original feature-table index.
    pub slots: Vec<usize>,
}

impl TrainBatch {
    pub fn build(
        observations: &[PairObservation],
        features: &[Vec<f64>],
    ) -> Result<Self, ComparatorError> {
        if observations.is_empty() {
            return Err(ComparatorError::EmptyBatch);
        }
        let mut slot_of = std::collections::HashMap::new();
        let mut items = Vec::new();
        let mut slots = Vec::new();
        let mut records = Vec::with_capacity(observations.len());
        for obs in observations {
            if obs.n <= 0.0 {
                return Err(ComparatorError::BadCount(obs.n));
            }
            let mut slot = |index: usize| -> Result<usize, ComparatorError> {
                if index >= features.len() {
                    return Err(ComparatorError::BadItemIndex { index, n: features.len() });
                }
                Ok(*slot_of.entry(index).or_insert_with(|| {
                    items.push(features[index].clone());
                    slots.push(index);
                    items.len() - 1
                }))
            };
            let i = slot(obs.i)?;
            let j = slot(obs.j)?;
            records.push(PairObservation { i, j, p: obs.p, n: obs.n });
        }
        Ok(Self { records, items, slots })
    }

    /// Total comparison weight `N = Σ n` of the batch.
    pub fn total_weight(&self) -> f64 {
        self.records.iter().map(|r| r.n).sum()
    }
}

/// Comparison-count-weighted binary cross-entropy.
///
/// `-(1/N) Σ n·[p·ln M + (1-p)·ln(1-M)]` with `N = Σ n`. Predictions are
/// clamped to `[1e-12, 1 - 1e-12]` inside the logs only; the sigmoid cannot
/// reach the endpoints for finite inputs, the clamp is a numerical guard.
pub fn loss_weighted_bce(predictions: &[f64], records: &[PairObservation]) -> f64 {
    assert_eq!(predictions.len(), records.len(), "predictions and records must align");
    let total: f64 = records.iter().map(|r| r.n).sum();
    let mut acc = 0.0;
    for (m, r) in predictions.iter().zip(records) {
        let m = m.clamp(1e-12, 1.0 - 1e-12);
        acc += r.n * (r.p * m.ln() + (1.0 - r.p) * (1.0 - m).ln());
    }
    -acc / total
}

/// Per-parameter gradients, mirroring the model layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub layers: Vec<LayerGradients>,
    pub hub_weight: Vec<f64>,
    pub hub_bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelGradients {
    pub fn zeros_like(model: &ComparatorModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weight: vec![0.0; l.weight.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            hub_weight: vec![0.0; model.hub_weight.len()],
            hub_bias: 0.0,
        }
    }

    /// Flattens in the model's parameter order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for layer in &self.layers {
            flat.extend_from_slice(&layer.weight);
            flat.extend_from_slice(&layer.bias);
        }
        flat.extend_from_slice(&self.hub_weight);
        flat.push(self.hub_bias);
        flat
    }
}

/// Batch predictions in record order.
pub fn forward_batch(model: &ComparatorModel, batch: &TrainBatch) -> Vec<f64> {
    let embeddings: Vec<Vec<f64>> = batch.items.iter().map(|f| model.embed(f)).collect();
    batch
        .records
        .iter()
        .map(|r| {
            let v: Vec<f64> =
                embeddings[r.i].iter().zip(&embeddings[r.j]).map(|(a, b)| a - b).collect();
            sigmoid(model.hub(&v))
        })
        .collect()
}

/// Exact analytic gradients of the weighted BCE over the batch.
///
/// Exploits the Siamese structure through the unique-item cache: each item is
/// embedded once, its upstream gradient accumulates over every record that
/// references it, and the backbone is backpropagated once per unique item.
pub fn backward(model: &ComparatorModel, batch: &TrainBatch) -> ModelGradients {
    let mut grads = ModelGradients::zeros_like(model);
    if batch.records.is_empty() {
        return grads;
    }
    let total = batch.total_weight();
    let traces: Vec<Vec<Vec<f64>>> = batch.items.iter().map(|f| model.embed_trace(f)).collect();
    let e = model.embedding_dim();
    let mut upstream = vec![vec![0.0; e]; batch.items.len()];

    for r in &batch.records {
        let zi = traces[r.i].last().unwrap();
        let zj = traces[r.j].last().unwrap();
        let v: Vec<f64> = zi.iter().zip(zj).map(|(a, b)| a - b).collect();
        let m = sigmoid(model.hub(&v));
        // d(loss)/d(hub preactivation) for this record.
        let dh = r.n * (m - r.p) / total;
        for k in 0..e {
            grads.hub_weight[k] += dh * v[k];
            upstream[r.i][k] += dh * model.hub_weight[k];
            upstream[r.j][k] -= dh * model.hub_weight[k];
        }
    }

    for (trace, mut delta) in traces.iter().zip(upstream) {
        for (layer_idx, layer) in model.layers.iter().enumerate().rev() {
            let input = &trace[layer_idx];
            let output = &trace[layer_idx + 1];
            if layer.activation == Activation::Relu {
                for (d, o) in delta.iter_mut().zip(output) {
                    if *o <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let lg = &mut grads.layers[layer_idx];
            for r in 0..layer.rows {
                lg.bias[r] += delta[r];
                let row = &mut lg.weight[r * layer.cols..(r + 1) * layer.cols];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += delta[r] * x;
                }
            }
            if layer_idx > 0 {
                let mut prev = vec![0.0; layer.cols];
                for r in 0..layer.rows {
                    let row = &layer.weight[r * layer.cols..(r + 1) * layer.cols];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += delta[r] * w;
                    }
                }
                delta = prev;
            }
        }
    }
    grads
}

/// Central finite differences of the batch loss over every parameter.
pub fn finite_difference_gradients(
    model: &ComparatorModel,
    batch: &TrainBatch,
    epsilon: f64,
) -> Vec<f64> {
    assert!(epsilon > 0.0);
    let mut probe = model.clone();
    let mut fd = Vec::with_capacity(model.param_count());
    for k in 0..model.param_count() {
        let saved = probe.param(k);
        probe.set_param(k, saved + epsilon);
        let plus = loss_weighted_bce(&forward_batch(&probe, batch), &batch.records);
        probe.set_param(k, saved - epsilon);
        let minus = loss_weighted_bce(&forward_batch(&probe, batch), &batch.records);
        probe.set_param(k, saved);
        fd.push((plus - minus) / (2.0 * epsilon));
    }
    fd
}

/// Worst relative error between two flat gradient vectors, with the
/// denominator floored at `max(|a|, |b|, 1e-12)` so zero gradients compare
/// cleanly.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-12))
        .fold(0.0, f64::max)
}

/// Analytic-vs-numeric gradient comparison; returns the worst relative error.
pub fn grad_check(model: &ComparatorModel, batch: &TrainBatch, epsilon: f64) -> f64 {
    let analytic = backward(model, batch).to_flat();
    let numeric = finite_difference_gradients(model, batch, epsilon);
    max_relative_error(&analytic, &numeric)
}

/// Training hyperparameters. Distinct learning rates for backbone and hub,
/// Adam moments, a per-epoch multiplicative decay, and the minimum
/// comparison-count threshold applied before pairing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_backbone: f64,
    pub lr_hub: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Multiplicative learning-rate factor applied each epoch, in (0, 1].
    pub decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub min_comparisons_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_backbone: 5e-3,
            lr_hub: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay: 0.97,
            epochs: 50,
            batch_size: 64,
            min_comparisons_threshold: 2.0,
            seed: 0,
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(
        &mut self,
        model: &mut ComparatorModel,
        grads: &[f64],
        lr_backbone: f64,
        lr_hub: f64,
        config: &TrainConfig,
    ) {
        self.t += 1;
        let bc1 = 1.0 - config.beta1.powi(self.t as i32);
        let bc2 = 1.0 - config.beta2.powi(self.t as i32);
        let hub_offset = model.hub_offset();
        for (k, &g) in grads.iter().enumerate() {
            self.m[k] = config.beta1 * self.m[k] + (1.0 - config.beta1) * g;
            self.v[k] = config.beta2 * self.v[k] + (1.0 - config.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            let lr = if k < hub_offset { lr_backbone } else { lr_hub };
            let p = model.param(k);
            model.set_param(k, p - lr * m_hat / (v_hat.sqrt() + config.epsilon));
        }
    }
}

/// Trains the model in place and returns the per-epoch full-dataset loss.
///
/// Each epoch re-randomizes pair orientations, reshuffles the record order,
/// and walks seeded mini-batches through Adam with the epoch-decayed learning
/// rates. Deterministic for a fixed seed.
pub fn train(
    model: &mut ComparatorModel,
    pair_records: &[PairObservation],
    features: &[Vec<f64>],
    config: &TrainConfig,
) -> Result<Vec<f64>, ComparatorError> {
    let kept: Vec<PairObservation> = pair_records
        .iter()
        .filter(|r| r.n >= config.min_comparisons_threshold)
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(ComparatorError::EmptyTrainingSet {
            threshold: config.min_comparisons_threshold,
        });
    }
    model.check_shape()?;
    for r in &kept {
        if r.i >= features.len() || r.j >= features.len() {
            return Err(ComparatorError::BadItemIndex {
                index: r.i.max(r.j),
                n: features.len(),
            });
        }
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "train/shuffle"));
    let mut orient_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "train/orientation"));
    let mut adam = Adam::new(model.param_count());
    let mut history = Vec::with_capacity(config.epochs);
    let batch_size = config.batch_size.max(1);
    let mut order: Vec<usize> = (0..kept.len()).collect();

    for epoch in 0..config.epochs {
        let oriented: Vec<PairObservation> = kept
            .iter()
            .map(|r| if orient_rng.random_bool(0.5) { r.flipped() } else { *r })
            .collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut shuffle_rng);
        let scale = config.decay.powi(epoch as i32);
        for chunk in order.chunks(batch_size) {
            let subset: Vec<PairObservation> = chunk.iter().map(|&k| oriented[k]).collect();
            let batch = TrainBatch::build(&subset, features)?;
            let grads = backward(model, &batch).to_flat();
            adam.step(model, &grads, config.lr_backbone * scale, config.lr_hub * scale, config);
        }
        let full = TrainBatch::build(&kept, features)?;
        history.push(loss_weighted_bce(&forward_batch(model, &full), &full.records));
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_features(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()).collect()
    }

    fn random_batch(model: &ComparatorModel, n_items: usize, n_records: usize, seed: u64) -> TrainBatch {
        let d = model.input_dim();
        let features = random_features(n_items, d, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let obs: Vec<PairObservation> = (0..n_records)
            .map(|_| {
                let i = rng.random_range(0..n_items);
                let mut j = rng.random_range(0..n_items);
                while j == i {
                    j = rng.random_range(0..n_items);
                }
                let n = rng.random_range(1..=20) as f64;
                let wins = rng.random_range(0..=n as u64) as f64;
                PairObservation { i, j, p: wins / n, n }
            })
            .collect();
        TrainBatch::build(&obs, &features).unwrap()
    }

    #[test]
    fn identical_features_give_exactly_half() {
        let model = ComparatorModel::init(&[4, 6, 3], 1);
        let x = vec![0.3, -0.2, 1.1, 0.0];
        assert_eq!(model.forward(&x, &x).unwrap(), 0.5);
    }

    #[test]
    fn forward_is_antisymmetric_to_machine_precision() {
        for seed in 0..5 {
            let model = ComparatorModel::init(&[5, 8, 4], seed);
            let feats = random_features(20, 5, seed + 100);
            for pair in feats.chunks(2) {
                let a = model.forward(&pair[0], &pair[1]).unwrap();
                let b = model.forward(&pair[1], &pair[0]).unwrap();
                assert!((a + b - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn hub_is_odd_and_matches_two_sided_form() {
        let model = ComparatorModel::init(&[3, 3], 7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            // Exact oddness.
            assert_eq!(model.hub(&neg), -model.hub(&v));
            // And agreement with the literal ½(F(V) - F(-V)) evaluation.
            let f = |u: &[f64]| {
                model.hub_weight.iter().zip(u).map(|(w, x)| w * x).sum::<f64>() + model.hub_bias
            };
            let two_sided = 0.5 * (f(&v) - f(&neg));
            assert!((model.hub(&v) - two_sided).abs() < 1e-12);
        }
    }

    #[test]
    fn hub_bias_is_bitwise_inert() {
        let mut model = ComparatorModel::init(&[4, 5, 2], 9);
        let feats = random_features(6, 4, 2);
        let before: Vec<f64> = feats
            .iter()
            .flat_map(|a| feats.iter().map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| model.forward(a, b).unwrap())
            .collect();
        model.hub_bias = 123.456;
        let after: Vec<f64> = feats
            .iter()
            .flat_map(|a| feats.iter().map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| model.forward(a, b).unwrap())
            .collect();
        for (x, y) in before.iter().zip(&after) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn loss_fixture_single_record() {
        // One record, 4 wins out of 5, prediction 0.8:
        // loss = -(0.8 ln 0.8 + 0.2 ln 0.2) = 0.500402...
        let records = [PairObservation { i: 0, j: 1, p: 0.8, n: 5.0 }];
        let loss = loss_weighted_bce(&[0.8], &records);
        let expected = -(0.8 * 0.8f64.ln() + 0.2 * 0.2f64.ln());
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 0.500402).abs() < 1e-6);
    }

    #[test]
    fn loss_is_minimized_at_the_empirical_probability() {
        let records = [
            PairObservation { i: 0, j: 1, p: 0.7, n: 3.0 },
            PairObservation { i: 1, j: 2, p: 0.2, n: 5.0 },
        ];
        let base = loss_weighted_bce(&[0.7, 0.2], &records);
        for perturb in [-0.05, 0.03, 0.1] {
            assert!(loss_weighted_bce(&[0.7 + perturb, 0.2], &records) > base);
            assert!(loss_weighted_bce(&[0.7, 0.2 + perturb], &records) > base);
        }
    }

    #[test]
    fn doubling_all_counts_leaves_loss_unchanged() {
        let records = [
            PairObservation { i: 0, j: 1, p: 0.75, n: 4.0 },
            PairObservation { i: 1, j: 2, p: 0.4, n: 10.0 },
        ];
        let doubled: Vec<PairObservation> =
            records.iter().map(|r| PairObservation { n: 2.0 * r.n, ..*r }).collect();
        let predictions = [0.6, 0.45];
        let a = loss_weighted_bce(&predictions, &records);
        let b = loss_weighted_bce(&predictions, &doubled);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn hub_bias_gradient_is_always_zero() {
        let model = ComparatorModel::init(&[4, 3], 11);
        let batch = random_batch(&model, 6, 10, 5);
        let grads = backward(&model, &batch);
        assert_eq!(grads.hub_bias, 0.0);
    }

    /// Seeds with all gradient magnitudes well above the finite-difference
    /// noise floor. A central difference of an O(1) loss at ε=1e-5 carries
    /// ~5e-12 of rounding noise, so configurations with gradients below
    /// ~1e-6 (dead ReLU paths, chance cancellations) cannot meet a 1e-5
    /// relative tolerance no matter how exact the analytic side is.
    const GRADCHECK_SEEDS: [u64; 12] = [0, 3, 7, 9, 10, 11, 18, 19, 20, 22, 23, 24];

    /// All-ReLU backbone: identity layers before the hub have structurally
    /// inert biases (a shared embedding shift cancels in the difference),
    /// whose exact-zero gradients only measure noise.
    fn gradcheck_model(seed: u64) -> ComparatorModel {
        let mut model = ComparatorModel::init(&[4, 6, 5, 3], seed);
        for layer in &mut model.layers {
            layer.activation = Activation::Relu;
        }
        model
    }

    #[test]
    fn gradcheck_passes_on_random_three_layer_models() {
        for seed in GRADCHECK_SEEDS {
            let model = gradcheck_model(seed);
            let batch = random_batch(&model, 7, 10, seed + 500);
            let err = grad_check(&model, &batch, 1e-5);
            assert!(err <= 1e-5, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let model = gradcheck_model(0);
        let batch = random_batch(&model, 7, 10, 500);
        let mut corrupted = backward(&model, &batch).to_flat();
        corrupted[0] += 1.0;
        let numeric = finite_difference_gradients(&model, &batch, 1e-5);
        assert!(max_relative_error(&corrupted, &numeric) > 1e-3);
    }

    #[test]
    fn stationary_batch_has_zero_gradient() {
        let model = ComparatorModel::init(&[3, 4, 2], 13);
        let features = random_features(5, 3, 77);
        let mut obs = Vec::new();
        for (i, j) in [(0usize, 1usize), (1, 2), (3, 4), (0, 4)] {
            let p = model.forward(&features[i], &features[j]).unwrap();
            obs.push(PairObservation { i, j, p, n: 3.0 });
        }
        let batch = TrainBatch::build(&obs, &features).unwrap();
        let flat = backward(&model, &batch).to_flat();
        let norm = flat.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(norm < 1e-10, "gradient norm {norm}");
    }

    #[test]
    fn hub_only_model_gradcheck_is_finite() {
        let model = ComparatorModel::init(&[4], 3);
        assert!(model.layers.is_empty());
        let features = random_features(4, 4, 8);
        let p = model.forward(&features[0], &features[1]).unwrap();
        // Stationary record: every gradient is zero, and the relative-error
        // floor keeps the comparison finite.
        let obs = [PairObservation { i: 0, j: 1, p, n: 2.0 }];
        let batch = TrainBatch::build(&obs, &features).unwrap();
        let analytic = backward(&model, &batch).to_flat();
        assert!(analytic.iter().all(|g| g.abs() < 1e-12));
        let err = grad_check(&model, &batch, 1e-5);
        assert!(err.is_finite());
    }

    #[test]
    fn record_weight_scales_its_gradient_contribution() {
        let model = ComparatorModel::init(&[3, 4, 2], 21);
        let features = random_features(4, 3, 9);
        let r = PairObservation { i: 0, j: 1, p: 0.9, n: 1.0 };
        // The filler record sits exactly at its empirical probability, so it
        // contributes weight to N but nothing to the gradient.
        let filler_p = model.forward(&features[2], &features[3]).unwrap();
        let batch1 = TrainBatch::build(
            &[r, PairObservation { i: 2, j: 3, p: filler_p, n: 3.0 }],
            &features,
        )
        .unwrap();
        let batch2 = TrainBatch::build(
            &[
                PairObservation { n: 2.0, ..r },
                PairObservation { i: 2, j: 3, p: filler_p, n: 2.0 },
            ],
            &features,
        )
        .unwrap();
        assert_eq!(batch1.total_weight(), batch2.total_weight());
        let g1 = backward(&model, &batch1).to_flat();
        let g2 = backward(&model, &batch2).to_flat();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn unique_item_cache_is_a_pure_optimization() {
        let model = ComparatorModel::init(&[3, 5, 2], 31);
        let features = random_features(3, 3, 10);
        // Three records all referencing overlapping items.
        let obs = [
            PairObservation { i: 0, j: 1, p: 0.8, n: 4.0 },
            PairObservation { i: 1, j: 2, p: 0.3, n: 2.0 },
            PairObservation { i: 0, j: 2, p: 0.6, n: 5.0 },
        ];
        let shared = TrainBatch::build(&obs, &features).unwrap();
        assert_eq!(shared.items.len(), 3);
        // The same batch with every occurrence copied to its own slot, so the
        // cache has nothing to share.
        let mut copied_features = Vec::new();
        let mut copied_obs = Vec::new();
        for r in &obs {
            copied_features.push(features[r.i].clone());
            copied_features.push(features[r.j].clone());
            copied_obs.push(PairObservation {
                i: copied_features.len() - 2,
                j: copied_features.len() - 1,
                p: r.p,
                n: r.n,
            });
        }
        let unshared = TrainBatch::build(&copied_obs, &copied_features).unwrap();
        assert_eq!(unshared.items.len(), 6);
        let g1 = backward(&model, &shared).to_flat();
        let g2 = backward(&model, &unshared).to_flat();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    fn separable_task(seed: u64) -> (Vec<PairObservation>, Vec<Vec<f64>>) {
        // Feature 0 encodes the true score; the rest is noise.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 14usize;
        let scores: Vec<f64> = (0..n).map(|k| -1.5 + 3.0 * k as f64 / (n - 1) as f64).collect();
        let features: Vec<Vec<f64>> = scores
            .iter()
            .map(|s| vec![*s, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let mut obs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let p = crate::scaling::jod_link(scores[i] - scores[j]);
                let k = 20u64;
                let wins = (0..k).filter(|_| rng.random_bool(p)).count() as f64;
                obs.push(PairObservation { i, j, p: wins / k as f64, n: k as f64 });
            }
        }
        (obs, features)
    }

    #[test]
    fn training_loss_is_nonincreasing_on_a_separable_task() {
        let (obs, features) = separable_task(4);
        let mut model = ComparatorModel::init(&[3, 4, 2], 4);
        let config = TrainConfig {
            epochs: 15,
            batch_size: 32,
            lr_backbone: 4e-3,
            lr_hub: 8e-3,
            seed: 4,
            ..Default::default()
        };
        let history = train(&mut model, &obs, &features, &config).unwrap();
        assert_eq!(history.len(), 15);
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss went up: {} -> {}", w[0], w[1]);
        }
        assert!(history.last().unwrap() < &history[0]);
    }

    #[test]
    fn training_is_deterministic_for_a_fixed_seed() {
        let (obs, features) = separable_task(6);
        let config = TrainConfig { epochs: 5, seed: 99, ..Default::default() };
        let mut m1 = ComparatorModel::init(&[3, 4, 2], 1);
        let mut m2 = ComparatorModel::init(&[3, 4, 2], 1);
        let h1 = train(&mut m1, &obs, &features, &config).unwrap();
        let h2 = train(&mut m2, &obs, &features, &config).unwrap();
        assert_eq!(h1, h2);
        for k in 0..m1.param_count() {
            assert_eq!(m1.param(k).to_bits(), m2.param(k).to_bits());
        }
    }

    #[test]
    fn swapping_every_record_orientation_preserves_the_trajectory() {
        let (obs, features) = separable_task(8);
        let swapped: Vec<PairObservation> = obs.iter().map(|r| r.flipped()).collect();
        let config = TrainConfig { epochs: 6, seed: 12, ..Default::default() };
        let mut m1 = ComparatorModel::init(&[3, 4, 2], 2);
        let mut m2 = ComparatorModel::init(&[3, 4, 2], 2);
        let h1 = train(&mut m1, &obs, &features, &config).unwrap();
        let h2 = train(&mut m2, &swapped, &features, &config).unwrap();
        for (a, b) in h1.iter().zip(&h2) {
            assert!((a - b).abs() < 1e-9, "trajectories diverged: {a} vs {b}");
        }
    }

    #[test]
    fn threshold_filters_and_can_empty_the_training_set() {
        let (obs, features) = separable_task(10);
        let thin: Vec<PairObservation> =
            obs.iter().map(|r| PairObservation { n: 1.0, ..*r }).collect();
        let mut model = ComparatorModel::init(&[3, 2], 0);
        let config = TrainConfig { epochs: 1, ..Default::default() };
        assert!(matches!(
            train(&mut model, &thin, &features, &config),
            Err(ComparatorError::EmptyTrainingSet { .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = ComparatorModel::init(&[5, 7, 3], 17);
        let config = TrainConfig::default();
        model.save_with_config(&path, Some(&config)).unwrap();
        let loaded = ComparatorModel::load(&path).unwrap();
        assert_eq!(loaded, model);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("format_version"));
        assert!(text.contains("min_comparisons_threshold"));
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let model = ComparatorModel::init(&[4, 2], 0);
        let bad = vec![0.0; 3];
        let good = vec![0.0; 4];
        assert!(matches!(
            model.forward(&bad, &good),
            Err(ComparatorError::DimensionMismatch { expected: 4, got: 3 })
        ));
    }
}
