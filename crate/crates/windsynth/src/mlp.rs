//! From-scratch multilayer perceptron: seeded initialization, forward pass,
//! backpropagation training, prediction, a central-difference gradient
//! verifier, and bit-exact model serialization.
//!
//! The architecture is fixed at three logistic hidden layers and one linear
//! output unit, so predictions can go negative. Training is plain gradient
//! descent on the mean squared error, full-batch by default or minibatch
//! with seeded shuffling; given the same seed, data and configuration the
//! trained weights are bit-identical across runs.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::DenseMatrix;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergenceDetected { epoch: usize },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad model data: {0}")]
    BadModel(String),
}

/// Batching strategy for gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    /// One update per epoch from the mean gradient over all rows.
    Full,
    /// One update per chunk of the given size.
    Minibatch(usize),
}

/// Network and training configuration. The hidden layer count is fixed at
/// three; 60 and 80 nodes per layer are the tested sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden_sizes: [usize; 3],
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub batch_mode: BatchMode,
    pub shuffle: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: [60, 60, 60],
            learning_rate: 0.1,
            epochs: 500,
            seed: 0,
            batch_mode: BatchMode::Full,
            shuffle: true,
        }
    }
}

impl MlpConfig {
    pub fn with_hidden(nodes: usize) -> Self {
        Self {
            hidden_sizes: [nodes; 3],
            ..Self::default()
        }
    }

    fn validate(&self) {
        assert!(
            self.hidden_sizes.iter().all(|&s| s >= 1),
            "hidden sizes must be at least 1"
        );
        assert!(self.learning_rate > 0.0, "learning rate must be positive");
        assert!(self.epochs >= 1, "epochs must be at least 1");
        if let BatchMode::Minibatch(size) = self.batch_mode {
            assert!(size >= 1, "minibatch size must be at least 1");
        }
    }
}

/// One dense layer; weights are `[n_in][n_out]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }
}

/// Weights and biases of the 3-hidden-layer perceptron plus its
/// configuration snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub config: MlpConfig,
}

impl MlpModel {
    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }
}

/// Per-epoch training losses (full-pass MSE after each epoch's updates).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().expect("at least one epoch")
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch_losses.len()
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Weights drawn i.i.d. uniform on [-0.5, 0.5] from a generator seeded by
/// `config.seed`, in fixed layer/row order; biases start at zero.
pub fn init(config: &MlpConfig, n_inputs: usize) -> MlpModel {
    config.validate();
    assert!(n_inputs >= 1, "need at least one input");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sizes = [
        n_inputs,
        config.hidden_sizes[0],
        config.hidden_sizes[1],
        config.hidden_sizes[2],
        1,
    ];
    let layers = sizes
        .windows(2)
        .map(|pair| {
            let mut layer = Layer::zeros(pair[0], pair[1]);
            for w in layer.weights.iter_mut() {
                *w = rng.gen::<f64>() - 0.5;
            }
            layer
        })
        .collect();
    MlpModel {
        layers,
        config: config.clone(),
    }
}

fn forward_into(model: &MlpModel, row: &[f64], acts: &mut [Vec<f64>]) -> f64 {
    let n_layers = model.layers.len();
    for (l, layer) in model.layers.iter().enumerate() {
        let (done, rest) = acts.split_at_mut(l);
        let out = &mut rest[0];
        let input: &[f64] = if l == 0 { row } else { &done[l - 1] };
        out.copy_from_slice(&layer.biases);
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let w = &layer.weights[i * layer.n_out..(i + 1) * layer.n_out];
            for (o, &wj) in out.iter_mut().zip(w) {
                *o += x * wj;
            }
        }
        if l != n_layers - 1 {
            for o in out.iter_mut() {
                *o = logistic(*o);
            }
        }
    }
    acts[n_layers - 1][0]
}

fn make_activation_buffers(model: &MlpModel) -> Vec<Vec<f64>> {
    model.layers.iter().map(|l| vec![0.0; l.n_out]).collect()
}

/// Single-row forward pass: logistic hidden units, linear output.
pub fn forward(model: &MlpModel, row: &[f64]) -> Result<f64, MlpError> {
    if row.len() != model.n_inputs() {
        return Err(MlpError::ShapeMismatch {
            expected: model.n_inputs(),
            found: row.len(),
        });
    }
    let mut acts = make_activation_buffers(model);
    Ok(forward_into(model, row, &mut acts))
}

/// Rowwise forward pass over a matrix; no state is mutated.
pub fn predict(model: &MlpModel, x: &DenseMatrix) -> Result<Vec<f64>, MlpError> {
    if x.n_rows() > 0 && x.n_cols() != model.n_inputs() {
        return Err(MlpError::ShapeMismatch {
            expected: model.n_inputs(),
            found: x.n_cols(),
        });
    }
    let mut acts = make_activation_buffers(model);
    Ok((0..x.n_rows())
        .map(|r| forward_into(model, x.row(r), &mut acts))
        .collect())
}

/// Mean squared error of the model over `(x, y)`, accumulated in row order.
pub fn mse_loss(model: &MlpModel, x: &DenseMatrix, y: &[f64]) -> Result<f64, MlpError> {
    if x.n_rows() != y.len() {
        return Err(MlpError::ShapeMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    let mut acts = make_activation_buffers(model);
    let mut sum = 0.0;
    for r in 0..x.n_rows() {
        let err = forward_into(model, x.row(r), &mut acts) - y[r];
        sum += err * err;
    }
    Ok(sum / x.n_rows() as f64)
}

/// Gradient accumulator matching the model's layer shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Layer::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }
}

struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(model: &MlpModel) -> Self {
        Self {
            acts: make_activation_buffers(model),
            deltas: make_activation_buffers(model),
        }
    }
}

/// Accumulate the backpropagated MSE gradient of one row into `grads`.
/// `out_grad` is dLoss/dOutput for this row (the caller applies batch
/// normalization there).
fn accumulate_row(
    model: &MlpModel,
    row: &[f64],
    out_grad: f64,
    ws: &mut Workspace,
    grads: &mut Gradients,
) {
    let n_layers = model.layers.len();
    ws.deltas[n_layers - 1][0] = out_grad;
    for l in (0..n_layers).rev() {
        let layer = &model.layers[l];
        let (below, here) = ws.deltas.split_at_mut(l);
        let delta = &here[0];
        let grad = &mut grads.layers[l];
        let input: &[f64] = if l == 0 { row } else { &ws.acts[l - 1] };
        for (i, &x) in input.iter().enumerate() {
            if x != 0.0 {
                let g = &mut grad.weights[i * layer.n_out..(i + 1) * layer.n_out];
                for (gj, &dj) in g.iter_mut().zip(delta) {
                    *gj += x * dj;
                }
            }
        }
        for (bj, &dj) in grad.biases.iter_mut().zip(delta) {
            *bj += dj;
        }
        if l > 0 {
            // delta for the layer below: (W * delta) .* sigma'(a)
            let prev_acts = &ws.acts[l - 1];
            let prev_delta = &mut below[l - 1];
            for (i, pd) in prev_delta.iter_mut().enumerate() {
                let w = &layer.weights[i * layer.n_out..(i + 1) * layer.n_out];
                let mut s = 0.0;
                for (wj, &dj) in w.iter().zip(delta) {
                    s += wj * dj;
                }
                let a = prev_acts[i];
                *pd = s * a * (1.0 - a);
            }
        }
    }
}

/// Mean MSE loss over `(x, y)` and its analytic gradient.
pub fn loss_and_gradients(
    model: &MlpModel,
    x: &DenseMatrix,
    y: &[f64],
) -> Result<(f64, Gradients), MlpError> {
    if x.n_rows() != y.len() || x.n_rows() == 0 {
        return Err(MlpError::ShapeMismatch {
            expected: x.n_rows().max(1),
            found: y.len(),
        });
    }
    if x.n_cols() != model.n_inputs() {
        return Err(MlpError::ShapeMismatch {
            expected: model.n_inputs(),
            found: x.n_cols(),
        });
    }
    let mut ws = Workspace::new(model);
    let mut grads = Gradients::zeros_like(model);
    let inv_n = 1.0 / x.n_rows() as f64;
    let mut loss = 0.0;
    for r in 0..x.n_rows() {
        let row = x.row(r);
        let out = forward_into(model, row, &mut ws.acts);
        let err = out - y[r];
        loss += err * err;
        accumulate_row(model, row, 2.0 * err * inv_n, &mut ws, &mut grads);
    }
    Ok((loss * inv_n, grads))
}

/// Central finite differences of the mean MSE loss for every weight and
/// bias, on a cloned model.
pub fn numeric_gradients(
    model: &MlpModel,
    x: &DenseMatrix,
    y: &[f64],
    epsilon: f64,
) -> Result<Gradients, MlpError> {
    assert!(
        epsilon > 0.0 && epsilon <= 1e-3,
        "epsilon must lie in (0, 1e-3]"
    );
    let mut probe = model.clone();
    let mut grads = Gradients::zeros_like(model);
    for l in 0..model.layers.len() {
        for w in 0..model.layers[l].weights.len() {
            let original = probe.layers[l].weights[w];
            probe.layers[l].weights[w] = original + epsilon;
            let up = mse_loss(&probe, x, y)?;
            probe.layers[l].weights[w] = original - epsilon;
            let down = mse_loss(&probe, x, y)?;
            probe.layers[l].weights[w] = original;
            grads.layers[l].weights[w] = (up - down) / (2.0 * epsilon);
        }
        for b in 0..model.layers[l].biases.len() {
            let original = probe.layers[l].biases[b];
            probe.layers[l].biases[b] = original + epsilon;
            let up = mse_loss(&probe, x, y)?;
            probe.layers[l].biases[b] = original - epsilon;
            let down = mse_loss(&probe, x, y)?;
            probe.layers[l].biases[b] = original;
            grads.layers[l].biases[b] = (up - down) / (2.0 * epsilon);
        }
    }
    Ok(grads)
}

/// Worst relative disagreement between two gradient sets. The denominator
/// floor guards parameters whose gradient is numerically zero.
pub fn max_relative_error(a: &Gradients, b: &Gradients) -> f64 {
    let mut worst = 0.0f64;
    for (la, lb) in a.layers.iter().zip(&b.layers) {
        for (&ga, &gb) in la
            .weights
            .iter()
            .chain(&la.biases)
            .zip(lb.weights.iter().chain(&lb.biases))
        {
            let rel = (ga - gb).abs() / (ga.abs() + gb.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Compare analytic backpropagation against central finite differences on
/// the given sample; returns the maximum relative error over all weights
/// and biases.
pub fn gradient_check(
    model: &MlpModel,
    x: &DenseMatrix,
    y: &[f64],
    epsilon: f64,
) -> Result<f64, MlpError> {
    let (_, analytic) = loss_and_gradients(model, x, y)?;
    let numeric = numeric_gradients(model, x, y, epsilon)?;
    Ok(max_relative_error(&analytic, &numeric))
}

fn apply_update(model: &mut MlpModel, grads: &Gradients, learning_rate: f64) {
    for (layer, grad) in model.layers.iter_mut().zip(&grads.layers) {
        for (w, g) in layer.weights.iter_mut().zip(&grad.weights) {
            *w -= learning_rate * g;
        }
        for (b, g) in layer.biases.iter_mut().zip(&grad.biases) {
            *b -= learning_rate * g;
        }
    }
}

fn batch_gradients(
    model: &MlpModel,
    x: &DenseMatrix,
    y: &[f64],
    rows: &[usize],
    ws: &mut Workspace,
    grads: &mut Gradients,
) {
    for layer in grads.layers.iter_mut() {
        layer.weights.fill(0.0);
        layer.biases.fill(0.0);
    }
    let inv_n = 1.0 / rows.len() as f64;
    for &r in rows {
        let row = x.row(r);
        let out = forward_into(model, row, &mut ws.acts);
        accumulate_row(model, row, 2.0 * (out - y[r]) * inv_n, ws, grads);
    }
}

/// Gradient-descent backpropagation minimizing mean squared error.
///
/// Deterministic given the seed: minibatch shuffling draws from a dedicated
/// generator stream, and full-batch mode iterates rows in order regardless
/// of the shuffle flag. Each recorded epoch loss is the full-pass MSE after
/// that epoch's updates, so the final loss equals the MSE of `predict` on
/// the training data.
pub fn train(
    mut model: MlpModel,
    x: &DenseMatrix,
    y: &[f64],
    config: &MlpConfig,
) -> Result<(MlpModel, TrainReport), MlpError> {
    config.validate();
    if x.n_rows() != y.len() || x.n_rows() == 0 {
        return Err(MlpError::ShapeMismatch {
            expected: x.n_rows().max(1),
            found: y.len(),
        });
    }
    if x.n_cols() != model.n_inputs() {
        return Err(MlpError::ShapeMismatch {
            expected: model.n_inputs(),
            found: x.n_cols(),
        });
    }
    model.config = config.clone();

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let mut ws = Workspace::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        match config.batch_mode {
            BatchMode::Full => {
                batch_gradients(&model, x, y, &order, &mut ws, &mut grads);
                apply_update(&mut model, &grads, config.learning_rate);
            }
            BatchMode::Minibatch(size) => {
                if config.shuffle {
                    use rand::seq::SliceRandom;
                    order.shuffle(&mut shuffle_rng);
                }
                for chunk in order.chunks(size) {
                    batch_gradients(&model, x, y, chunk, &mut ws, &mut grads);
                    apply_update(&mut model, &grads, config.learning_rate);
                }
            }
        }
        let loss = mse_loss(&model, x, y)?;
        if !loss.is_finite() {
            return Err(MlpError::DivergenceDetected { epoch });
        }
        epoch_losses.push(loss);
    }

    Ok((model, TrainReport { epoch_losses }))
}

const MODEL_MAGIC: &[u8; 8] = b"WSMLPv01";

pub(crate) fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], MlpError> {
        if self.pos + n > self.data.len() {
            return Err(MlpError::BadModel("unexpected end of data".into()));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub(crate) fn u64(&mut self) -> Result<u64, MlpError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, MlpError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}

/// Serialize the model (config, seed, and all weight/bias arrays in layer
/// order) as little-endian 64-bit values. Round-trips bit-exactly.
pub fn model_to_bytes(model: &MlpModel) -> Vec<u8> {
    let cfg = &model.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    for &h in &cfg.hidden_sizes {
        push_u64(&mut buf, h as u64);
    }
    push_f64(&mut buf, cfg.learning_rate);
    push_u64(&mut buf, cfg.epochs as u64);
    push_u64(&mut buf, cfg.seed);
    match cfg.batch_mode {
        BatchMode::Full => {
            buf.push(0);
            push_u64(&mut buf, 0);
        }
        BatchMode::Minibatch(size) => {
            buf.push(1);
            push_u64(&mut buf, size as u64);
        }
    }
    buf.push(cfg.shuffle as u8);
    push_u64(&mut buf, model.layers.len() as u64);
    for layer in &model.layers {
        push_u64(&mut buf, layer.n_in as u64);
        push_u64(&mut buf, layer.n_out as u64);
        for &w in &layer.weights {
            push_f64(&mut buf, w);
        }
        for &b in &layer.biases {
            push_f64(&mut buf, b);
        }
    }
    buf
}

pub fn model_from_bytes(data: &[u8]) -> Result<MlpModel, MlpError> {
    let mut r = ByteReader { data, pos: 0 };
    if r.take(8)? != MODEL_MAGIC {
        return Err(MlpError::BadModel("bad magic".into()));
    }
    let hidden_sizes = [
        r.u64()? as usize,
        r.u64()? as usize,
        r.u64()? as usize,
    ];
    let learning_rate = r.f64()?;
    let epochs = r.u64()? as usize;
    let seed = r.u64()?;
    let mode_tag = r.take(1)?[0];
    let batch_size = r.u64()? as usize;
    let batch_mode = match mode_tag {
        0 => BatchMode::Full,
        1 => BatchMode::Minibatch(batch_size),
        other => return Err(MlpError::BadModel(format!("bad batch mode {other}"))),
    };
    let shuffle = match r.take(1)?[0] {
        0 => false,
        1 => true,
        other => return Err(MlpError::BadModel(format!("bad shuffle flag {other}"))),
    };
    let n_layers = r.u64()? as usize;
    if n_layers != 4 {
        return Err(MlpError::BadModel(format!(
            "expected 4 layers, found {n_layers}"
        )));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let n_in = r.u64()? as usize;
        let n_out = r.u64()? as usize;
        if n_in == 0 || n_out == 0 || n_in.saturating_mul(n_out) > 1 << 32 {
            return Err(MlpError::BadModel("implausible layer shape".into()));
        }
        let mut weights = Vec::with_capacity(n_in * n_out);
        for _ in 0..n_in * n_out {
            weights.push(r.f64()?);
        }
        let mut biases = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            biases.push(r.f64()?);
        }
        layers.push(Layer {
            n_in,
            n_out,
            weights,
            biases,
        });
    }
    for pair in layers.windows(2) {
        if pair[0].n_out != pair[1].n_in {
            return Err(MlpError::BadModel("layer shapes do not chain".into()));
        }
    }
    if layers[3].n_out != 1 {
        return Err(MlpError::BadModel("output layer must have size one".into()));
    }
    if r.pos != data.len() {
        return Err(MlpError::BadModel("trailing bytes".into()));
    }
    Ok(MlpModel {
        layers,
        config: MlpConfig {
            hidden_sizes,
            learning_rate,
            epochs,
            seed,
            batch_mode,
            shuffle,
        },
    })
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<(), MlpError> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|source| MlpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(&model_to_bytes(model))
        .map_err(|source| MlpError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel, MlpError> {
    let path = path.as_ref();
    let mut data = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|source| MlpError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    model_from_bytes(&data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(seed: u64) -> MlpConfig {
        MlpConfig {
            hidden_sizes: [5, 4, 3],
            learning_rate: 0.3,
            epochs: 50,
            seed,
            batch_mode: BatchMode::Full,
            shuffle: true,
        }
    }

    #[test]
    fn same_seed_gives_identical_weights() {
        let cfg = small_config(42);
        let a = init(&cfg, 7);
        let b = init(&cfg, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = init(&small_config(1), 7);
        let b = init(&small_config(2), 7);
        assert_ne!(a.layers[0].weights, b.layers[0].weights);
    }

    #[test]
    fn shape_chain_for_60_node_network() {
        let model = init(&MlpConfig::with_hidden(60), 49);
        let dims: Vec<(usize, usize)> = model.layers.iter().map(|l| (l.n_in, l.n_out)).collect();
        assert_eq!(dims, vec![(49, 60), (60, 60), (60, 60), (60, 1)]);
        assert!(model
            .layers
            .iter()
            .all(|l| l.biases.iter().all(|&b| b == 0.0)));
        assert!(model.layers.iter().flat_map(|l| &l.weights).all(|&w| (-0.5..=0.5).contains(&w)));
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut model = init(&small_config(3), 4);
        for layer in model.layers.iter_mut() {
            layer.weights.fill(0.0);
        }
        assert_eq!(forward(&model, &[1.0, -2.0, 3.0, 0.5]).unwrap(), 0.0);
        assert_eq!(forward(&model, &[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_sigmoid_chain() {
        // one unit per layer with hand-set weights
        let cfg = MlpConfig {
            hidden_sizes: [1, 1, 1],
            ..small_config(0)
        };
        let mut model = init(&cfg, 1);
        let ws = [0.7, -1.3, 0.4, 2.0];
        let bs = [0.1, 0.2, -0.3, 0.05];
        for (l, layer) in model.layers.iter_mut().enumerate() {
            layer.weights[0] = ws[l];
            layer.biases[0] = bs[l];
        }
        let x = 0.9;
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let a1 = s(x * 0.7 + 0.1);
        let a2 = s(a1 * -1.3 + 0.2);
        let a3 = s(a2 * 0.4 - 0.3);
        let expected = a3 * 2.0 + 0.05;
        let got = forward(&model, &[x]).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}, want {expected}");
    }

    #[test]
    fn linear_output_can_go_negative() {
        let cfg = MlpConfig {
            hidden_sizes: [1, 1, 1],
            ..small_config(0)
        };
        let mut model = init(&cfg, 1);
        for layer in model.layers.iter_mut() {
            layer.weights.fill(1.0);
        }
        model.layers[3].weights[0] = -2.0;
        let out = forward(&model, &[1.0]).unwrap();
        assert!(out < 0.0, "expected negative output, got {out}");
    }

    #[test]
    fn wrong_row_length_is_shape_mismatch() {
        let model = init(&small_config(5), 4);
        assert!(matches!(
            forward(&model, &[1.0, 2.0]),
            Err(MlpError::ShapeMismatch { .. })
        ));
    }

    fn constant_problem(n_rows: usize, c: f64) -> (DenseMatrix, Vec<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rows: Vec<Vec<f64>> = (0..n_rows)
            .map(|_| (0..3).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        (DenseMatrix::from_rows(&rows), vec![c; n_rows])
    }

    #[test]
    fn constant_target_is_learned() {
        let (x, y) = constant_problem(50, 0.37);
        let cfg = MlpConfig {
            hidden_sizes: [5, 4, 3],
            learning_rate: 0.5,
            epochs: 600,
            seed: 7,
            batch_mode: BatchMode::Full,
            shuffle: false,
        };
        let model = init(&cfg, 3);
        let (model, report) = train(model, &x, &y, &cfg).unwrap();
        assert!(
            report.final_loss() < 1e-6,
            "final loss {}",
            report.final_loss()
        );
        for pred in predict(&model, &x).unwrap() {
            assert!((pred - 0.37).abs() < 1e-2, "prediction {pred}");
        }
    }

    #[test]
    fn xor_pattern_is_learned() {
        let x = DenseMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ]);
        let y = vec![0.0, 1.0, 1.0, 0.0];
        // symmetry breaking through three logistic layers with the small
        // uniform init is slow; the margin only opens after ~5k epochs
        let cfg = MlpConfig {
            hidden_sizes: [8, 8, 8],
            learning_rate: 0.3,
            epochs: 10_000,
            seed: 5,
            batch_mode: BatchMode::Full,
            shuffle: false,
        };
        let model = init(&cfg, 2);
        let (model, _) = train(model, &x, &y, &cfg).unwrap();
        let preds = predict(&model, &x).unwrap();
        for (pred, target) in preds.iter().zip(&y) {
            if *target == 0.0 {
                assert!(*pred < 0.5, "expected < 0.5 for target 0, got {pred}");
            } else {
                assert!(*pred > 0.5, "expected > 0.5 for target 1, got {pred}");
            }
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..5).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let x = DenseMatrix::from_rows(&rows);
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin() * 0.5).collect();
        let cfg = MlpConfig {
            hidden_sizes: [6, 5, 4],
            learning_rate: 0.2,
            epochs: 30,
            seed: 4242,
            batch_mode: BatchMode::Minibatch(8),
            shuffle: true,
        };
        let (m1, r1) = train(init(&cfg, 5), &x, &y, &cfg).unwrap();
        let (m2, r2) = train(init(&cfg, 5), &x, &y, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn predict_on_training_data_matches_final_loss() {
        let (x, y) = constant_problem(30, 0.2);
        let cfg = MlpConfig {
            hidden_sizes: [4, 3, 2],
            learning_rate: 0.4,
            epochs: 100,
            seed: 9,
            batch_mode: BatchMode::Full,
            shuffle: false,
        };
        let (model, report) = train(init(&cfg, 3), &x, &y, &cfg).unwrap();
        let preds = predict(&model, &x).unwrap();
        let mut mse = 0.0;
        for (p, t) in preds.iter().zip(&y) {
            mse += (p - t) * (p - t);
        }
        mse /= y.len() as f64;
        assert!(
            (mse - report.final_loss()).abs() < 1e-12,
            "mse {mse} vs final loss {}",
            report.final_loss()
        );
    }

    #[test]
    fn final_loss_not_above_initial_loss_on_smooth_problem() {
        let (x, y) = constant_problem(60, 0.5);
        let cfg = MlpConfig {
            hidden_sizes: [5, 5, 5],
            learning_rate: 0.2,
            epochs: 80,
            seed: 21,
            batch_mode: BatchMode::Full,
            shuffle: false,
        };
        let model = init(&cfg, 3);
        let initial = mse_loss(&model, &x, &y).unwrap();
        let (_, report) = train(model, &x, &y, &cfg).unwrap();
        assert!(report.final_loss() <= initial);
    }

    #[test]
    fn empty_prediction_input_gives_empty_output() {
        let model = init(&small_config(1), 3);
        let x = DenseMatrix::zeros(0, 3);
        assert_eq!(predict(&model, &x).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn batched_and_rowwise_prediction_agree_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..6).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let x = DenseMatrix::from_rows(&rows);
        let model = init(&small_config(31), 6);
        let batched = predict(&model, &x).unwrap();
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(batched[r], forward(&model, row).unwrap());
        }
    }

    fn random_sample(
        n_rows: usize,
        n_cols: usize,
        seed: u64,
    ) -> (DenseMatrix, Vec<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n_rows)
            .map(|_| (0..n_cols).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y: Vec<f64> = (0..n_rows).map(|_| rng.gen::<f64>() - 0.5).collect();
        (DenseMatrix::from_rows(&rows), y)
    }

    #[test]
    fn gradient_check_passes_on_random_networks() {
        for seed in 0..5u64 {
            let cfg = MlpConfig {
                hidden_sizes: [5, 4, 3],
                ..small_config(seed)
            };
            let model = init(&cfg, 4);
            let (x, y) = random_sample(6, 4, seed + 100);
            let err = gradient_check(&model, &x, &y, 1e-5).unwrap();
            assert!(err < 1e-5, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn gradient_check_exact_for_output_layer_of_zero_net() {
        // with all weights zero the loss is exactly quadratic in each
        // output-layer weight, so central differences are exact up to
        // rounding
        let cfg = small_config(0);
        let mut model = init(&cfg, 3);
        for layer in model.layers.iter_mut() {
            layer.weights.fill(0.0);
        }
        let (x, y) = random_sample(5, 3, 1234);
        let (_, analytic) = loss_and_gradients(&model, &x, &y).unwrap();
        let numeric = numeric_gradients(&model, &x, &y, 1e-5).unwrap();
        let l = model.layers.len() - 1;
        for (a, n) in analytic.layers[l]
            .weights
            .iter()
            .zip(&numeric.layers[l].weights)
        {
            assert!((a - n).abs() < 1e-10, "analytic {a} vs numeric {n}");
        }
    }

    #[test]
    fn corrupted_gradients_fail_the_check() {
        let cfg = small_config(8);
        let model = init(&cfg, 4);
        let (x, y) = random_sample(8, 4, 2020);
        let (_, mut corrupted) = loss_and_gradients(&model, &x, &y).unwrap();
        // sign-flip the output layer, as a broken backprop would
        for w in corrupted.layers[3].weights.iter_mut() {
            *w = -*w;
        }
        let numeric = numeric_gradients(&model, &x, &y, 1e-5).unwrap();
        let err = max_relative_error(&corrupted, &numeric);
        assert!(err > 1e-1, "corruption went undetected: {err}");
    }

    #[test]
    fn model_serialization_round_trips_bit_exactly() {
        let cfg = MlpConfig {
            hidden_sizes: [6, 5, 4],
            learning_rate: 0.07,
            epochs: 123,
            seed: 998877,
            batch_mode: BatchMode::Minibatch(32),
            shuffle: true,
        };
        let model = init(&cfg, 9);
        let bytes = model_to_bytes(&model);
        let back = model_from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        for (la, lb) in model.layers.iter().zip(&back.layers) {
            for (a, b) in la.weights.iter().zip(&lb.weights) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn truncated_model_data_is_rejected() {
        let model = init(&small_config(3), 4);
        let bytes = model_to_bytes(&model);
        assert!(matches!(
            model_from_bytes(&bytes[..bytes.len() - 4]),
            Err(MlpError::BadModel(_))
        ));
        assert!(matches!(
            model_from_bytes(b"NOTMODEL"),
            Err(MlpError::BadModel(_))
        ));
    }
}
