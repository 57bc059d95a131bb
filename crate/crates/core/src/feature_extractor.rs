//! A small reference feature network standing in for a pre-trained CNN:
//! dense and convolutional layers without biases, the squared-hinge
//! surrogate loss, its penultimate-activation gradient, and plain
//! gradient-descent updates that touch the network and the hinge head only.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation.
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Shape of the tensor flowing between layers, stored row-major with the
/// channel index outermost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DataShape {
    Vector { len: usize },
    Channels { channels: usize, len: usize },
    Image { channels: usize, height: usize, width: usize },
}

impl DataShape {
    pub fn size(&self) -> usize {
        match *self {
            DataShape::Vector { len } => len,
            DataShape::Channels { channels, len } => channels * len,
            DataShape::Image { channels, height, width } => channels * height * width,
        }
    }
}

/// Layer description before shapes are resolved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LayerOp {
    Dense { outputs: usize },
    Conv1d { kernel_size: usize, channels: usize },
    Conv2d { kernel_size: usize, channels: usize },
}

/// One layer of a [`NetSpec`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(flatten)]
    pub op: LayerOp,
    pub activation: Activation,
}

/// Architecture description; weights are drawn at build time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input: DataShape,
    pub layers: Vec<LayerSpec>,
}

impl NetSpec {
    /// The default reference architecture on vector input: one width-3
    /// convolution with 4 channels, one dense layer to 8 features, tanh
    /// throughout.
    pub fn reference(input_dim: usize) -> Self {
        NetSpec {
            input: DataShape::Vector { len: input_dim },
            layers: vec![
                LayerSpec {
                    op: LayerOp::Conv1d { kernel_size: 3, channels: 4 },
                    activation: Activation::Tanh,
                },
                LayerSpec { op: LayerOp::Dense { outputs: 8 }, activation: Activation::Tanh },
            ],
        }
    }
}

/// A layer with resolved input geometry and materialized weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub op: ResolvedOp,
    pub weights: Vec<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ResolvedOp {
    Dense { inputs: usize, outputs: usize },
    Conv1d { in_channels: usize, in_len: usize, kernel: usize, out_channels: usize },
    Conv2d { in_channels: usize, in_h: usize, in_w: usize, kernel: usize, out_channels: usize },
}

impl ResolvedOp {
    fn weight_count(&self) -> usize {
        match *self {
            ResolvedOp::Dense { inputs, outputs } => inputs * outputs,
            ResolvedOp::Conv1d { in_channels, kernel, out_channels, .. } => {
                out_channels * in_channels * kernel
            }
            ResolvedOp::Conv2d { in_channels, kernel, out_channels, .. } => {
                out_channels * in_channels * kernel * kernel
            }
        }
    }

    fn output_shape(&self) -> DataShape {
        match *self {
            ResolvedOp::Dense { outputs, .. } => DataShape::Vector { len: outputs },
            ResolvedOp::Conv1d { in_len, kernel, out_channels, .. } => {
                DataShape::Channels { channels: out_channels, len: in_len - kernel + 1 }
            }
            ResolvedOp::Conv2d { in_h, in_w, kernel, out_channels, .. } => DataShape::Image {
                channels: out_channels,
                height: in_h - kernel + 1,
                width: in_w - kernel + 1,
            },
        }
    }
}

fn resolve_op(op: &LayerOp, input: DataShape) -> Result<ResolvedOp> {
    match *op {
        LayerOp::Dense { outputs } => {
            if outputs == 0 {
                return Err(Error::ShapeMismatch("dense layer needs outputs >= 1".into()));
            }
            Ok(ResolvedOp::Dense { inputs: input.size(), outputs })
        }
        LayerOp::Conv1d { kernel_size, channels } => {
            let (in_channels, in_len) = match input {
                DataShape::Vector { len } => (1, len),
                DataShape::Channels { channels, len } => (channels, len),
                DataShape::Image { .. } => {
                    return Err(Error::ShapeMismatch("conv1d cannot consume image input".into()))
                }
            };
            if kernel_size == 0 || channels == 0 || in_len < kernel_size {
                return Err(Error::ShapeMismatch(format!(
                    "conv1d kernel {kernel_size} over length {in_len}"
                )));
            }
            Ok(ResolvedOp::Conv1d { in_channels, in_len, kernel: kernel_size, out_channels: channels })
        }
        LayerOp::Conv2d { kernel_size, channels } => {
            let (in_channels, in_h, in_w) = match input {
                DataShape::Image { channels, height, width } => (channels, height, width),
                _ => {
                    return Err(Error::ShapeMismatch("conv2d requires image input".into()));
                }
            };
            if kernel_size == 0 || channels == 0 || in_h < kernel_size || in_w < kernel_size {
                return Err(Error::ShapeMismatch(format!(
                    "conv2d kernel {kernel_size} over {in_h}x{in_w}"
                )));
            }
            Ok(ResolvedOp::Conv2d { in_channels, in_h, in_w, kernel: kernel_size, out_channels: channels })
        }
    }
}

/// The feature extractor: an ordered list of bias-free layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureNet {
    pub input: DataShape,
    pub layers: Vec<Layer>,
}

impl FeatureNet {
    /// Build from a spec with weights drawn from a seeded uniform(−0.1, 0.1).
    pub fn build(spec: &NetSpec, seed: u64) -> Result<Self> {
        if spec.layers.is_empty() {
            return Err(Error::ShapeMismatch("network needs at least one layer".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut shape = spec.input;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for layer_spec in &spec.layers {
            let op = resolve_op(&layer_spec.op, shape)?;
            let weights = (0..op.weight_count()).map(|_| rng.gen_range(-0.1..0.1)).collect();
            shape = op.output_shape();
            layers.push(Layer { op, weights, activation: layer_spec.activation });
        }
        Ok(FeatureNet { input: spec.input, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input.size()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.op.output_shape().size())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    /// Feature vector `f(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.output)
    }

    fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input length {} vs network input {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let z = apply_op(&layer.op, &layer.weights, &current);
            inputs.push(current);
            current = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre_activations.push(z);
        }
        Ok(Trace { inputs, pre_activations, output: current })
    }

    /// Weight gradients for every layer plus the input gradient, given the
    /// loss gradient at the output features.
    fn backward(&self, trace: &Trace, grad_output: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut grads: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
        let mut upstream = grad_output.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let delta: Vec<f64> = upstream
                .iter()
                .zip(&trace.pre_activations[idx])
                .map(|(g, &z)| g * layer.activation.derivative(z))
                .collect();
            let (w_grad, input_grad) =
                op_gradients(&layer.op, &layer.weights, &trace.inputs[idx], &delta);
            grads[idx] = w_grad;
            upstream = input_grad;
        }
        (grads, upstream)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

struct Trace {
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    output: Vec<f64>,
}

fn apply_op(op: &ResolvedOp, w: &[f64], input: &[f64]) -> Vec<f64> {
    match *op {
        ResolvedOp::Dense { inputs, outputs } => {
            let mut out = vec![0.0; outputs];
            for (o, out_val) in out.iter_mut().enumerate() {
                let row = &w[o * inputs..(o + 1) * inputs];
                *out_val = row.iter().zip(input).map(|(a, b)| a * b).sum();
            }
            out
        }
        ResolvedOp::Conv1d { in_channels, in_len, kernel, out_channels } => {
            let out_len = in_len - kernel + 1;
            let mut out = vec![0.0; out_channels * out_len];
            for o in 0..out_channels {
                for p in 0..out_len {
                    let mut acc = 0.0;
                    for i in 0..in_channels {
                        for t in 0..kernel {
                            acc += w[(o * in_channels + i) * kernel + t] * input[i * in_len + p + t];
                        }
                    }
                    out[o * out_len + p] = acc;
                }
            }
            out
        }
        ResolvedOp::Conv2d { in_channels, in_h, in_w, kernel, out_channels } => {
            let out_h = in_h - kernel + 1;
            let out_w = in_w - kernel + 1;
            let mut out = vec![0.0; out_channels * out_h * out_w];
            for o in 0..out_channels {
                for r in 0..out_h {
                    for c in 0..out_w {
                        let mut acc = 0.0;
                        for i in 0..in_channels {
                            for u in 0..kernel {
                                for v in 0..kernel {
                                    acc += w[((o * in_channels + i) * kernel + u) * kernel + v]
                                        * input[(i * in_h + r + u) * in_w + c + v];
                                }
                            }
                        }
                        out[(o * out_h + r) * out_w + c] = acc;
                    }
                }
            }
            out
        }
    }
}

fn op_gradients(
    op: &ResolvedOp,
    w: &[f64],
    input: &[f64],
    delta: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    match *op {
        ResolvedOp::Dense { inputs, outputs } => {
            let mut w_grad = vec![0.0; w.len()];
            let mut in_grad = vec![0.0; inputs];
            for o in 0..outputs {
                for i in 0..inputs {
                    w_grad[o * inputs + i] = delta[o] * input[i];
                    in_grad[i] += w[o * inputs + i] * delta[o];
                }
            }
            (w_grad, in_grad)
        }
        ResolvedOp::Conv1d { in_channels, in_len, kernel, out_channels } => {
            let out_len = in_len - kernel + 1;
            let mut w_grad = vec![0.0; w.len()];
            let mut in_grad = vec![0.0; in_channels * in_len];
            for o in 0..out_channels {
                for p in 0..out_len {
                    let d = delta[o * out_len + p];
                    for i in 0..in_channels {
                        for t in 0..kernel {
                            w_grad[(o * in_channels + i) * kernel + t] += d * input[i * in_len + p + t];
                            in_grad[i * in_len + p + t] += d * w[(o * in_channels + i) * kernel + t];
                        }
                    }
                }
            }
            (w_grad, in_grad)
        }
        ResolvedOp::Conv2d { in_channels, in_h, in_w, kernel, out_channels } => {
            let out_h = in_h - kernel + 1;
            let out_w = in_w - kernel + 1;
            let mut w_grad = vec![0.0; w.len()];
            let mut in_grad = vec![0.0; in_channels * in_h * in_w];
            for o in 0..out_channels {
                for r in 0..out_h {
                    for c in 0..out_w {
                        let d = delta[(o * out_h + r) * out_w + c];
                        for i in 0..in_channels {
                            for u in 0..kernel {
                                for v in 0..kernel {
                                    let widx = ((o * in_channels + i) * kernel + u) * kernel + v;
                                    let iidx = (i * in_h + r + u) * in_w + c + v;
                                    w_grad[widx] += d * input[iidx];
                                    in_grad[iidx] += d * w[widx];
                                }
                            }
                        }
                    }
                }
            }
            (w_grad, in_grad)
        }
    }
}

/// One-vs-rest linear hinge head over the extracted features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HingeHead {
    /// One weight row per pseudo-class.
    pub w: Vec<Vec<f64>>,
    /// Hinge penalty `C`.
    pub c: f64,
    pub lr: f64,
    /// Gradient-descent iterations one refit is allowed.
    pub gr_budget: usize,
}

impl HingeHead {
    pub fn zeros(classes: usize, dim: usize, c: f64, lr: f64, gr_budget: usize) -> Self {
        HingeHead { w: vec![vec![0.0; dim]; classes], c, lr, gr_budget }
    }

    pub fn classes(&self) -> usize {
        self.w.len()
    }

    pub fn dim(&self) -> usize {
        self.w.first().map_or(0, |r| r.len())
    }
}

/// ±1 one-vs-rest targets of a one-hot row.
pub fn one_hot_targets(row: &[u8]) -> Result<Vec<f64>> {
    if row.iter().map(|&b| b as u32).sum::<u32>() != 1 {
        return Err(Error::ShapeMismatch("pseudo-label rows must be one-hot".into()));
    }
    Ok(row.iter().map(|&b| if b == 1 { 1.0 } else { -1.0 }).collect())
}

/// Squared-hinge loss with an L2 term:
/// `½‖w‖² + C·Σᵢ Σ_c max(1 − y_ic·w_c·fᵢ, 0)²`.
pub fn hinge_loss(head: &HingeHead, features: &[Vec<f64>], pseudo: &[Vec<u8>]) -> Result<f64> {
    if features.len() != pseudo.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows vs {} label rows",
            features.len(),
            pseudo.len()
        )));
    }
    let mut loss: f64 = head.w.iter().flatten().map(|v| 0.5 * v * v).sum();
    for (f, labels) in features.iter().zip(pseudo) {
        if f.len() != head.dim() {
            return Err(Error::ShapeMismatch(format!(
                "feature dim {} vs head dim {}",
                f.len(),
                head.dim()
            )));
        }
        let targets = one_hot_targets(labels)?;
        for (w_row, &y) in head.w.iter().zip(&targets) {
            let margin = 1.0 - y * dot(w_row, f);
            if margin > 0.0 {
                loss += head.c * margin * margin;
            }
        }
    }
    Ok(loss)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss gradient with respect to one penultimate activation:
/// `Σ_c −2C·y_c·w_c·max(1 − y_c·w_c·h, 0)`.
pub fn grad_penultimate(head: &HingeHead, h: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
    if h.len() != head.dim() || targets.len() != head.classes() {
        return Err(Error::ShapeMismatch("gradient shapes inconsistent".into()));
    }
    let mut grad = vec![0.0; h.len()];
    for (w_row, &y) in head.w.iter().zip(targets) {
        let margin = 1.0 - y * dot(w_row, h);
        if margin > 0.0 {
            let scale = -2.0 * head.c * y * margin;
            for (g, &w) in grad.iter_mut().zip(w_row) {
                *g += scale * w;
            }
        }
    }
    Ok(grad)
}

fn head_gradient(head: &HingeHead, features: &[Vec<f64>], pseudo: &[Vec<u8>]) -> Result<Vec<Vec<f64>>> {
    let mut grads: Vec<Vec<f64>> = head.w.to_vec();
    for (f, labels) in features.iter().zip(pseudo) {
        let targets = one_hot_targets(labels)?;
        for ((g_row, w_row), &y) in grads.iter_mut().zip(&head.w).zip(&targets) {
            let margin = 1.0 - y * dot(w_row, f);
            if margin > 0.0 {
                let scale = -2.0 * head.c * y * margin;
                for (g, &fv) in g_row.iter_mut().zip(f) {
                    *g += scale * fv;
                }
            }
        }
    }
    Ok(grads)
}

/// Refit the head alone by `gr_budget` gradient-descent steps on frozen
/// features.
pub fn fit_head(head: &HingeHead, features: &[Vec<f64>], pseudo: &[Vec<u8>]) -> Result<HingeHead> {
    let mut current = head.clone();
    for _ in 0..current.gr_budget {
        let grads = head_gradient(&current, features, pseudo)?;
        for (row, g_row) in current.w.iter_mut().zip(&grads) {
            for (w, &g) in row.iter_mut().zip(g_row) {
                if !g.is_finite() {
                    return Err(Error::NonFinite("head gradient"));
                }
                *w -= current.lr * g;
            }
        }
    }
    Ok(current)
}

/// One gradient-descent step on the batch: back-propagates the hinge
/// gradient through every layer and.updates the network weights (and the
/// head too unless `update_head` is false). Aborts without mutating
/// anything if any gradient is non-finite.
pub fn train_step(
    net: &FeatureNet,
    head: &HingeHead,
    batch: &[Vec<f64>],
    pseudo: &[Vec<u8>],
    lr: f64,
    update_head: bool,
) -> Result<(FeatureNet, HingeHead)> {
    if batch.is_empty() {
        return Err(Error::ShapeMismatch("train_step needs a nonempty batch".into()));
    }
    if batch.len() != pseudo.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples vs {} label rows",
            batch.len(),
            pseudo.len()
        )));
    }
    let mut net_grads: Vec<Vec<f64>> =
        net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
    let mut features = Vec::with_capacity(batch.len());
    for x in batch {
        let trace = net.forward_trace(x)?;
        features.push(trace.output.clone());
        let targets = one_hot_targets(&pseudo[features.len() - 1])?;
        let grad_out = grad_penultimate(head, &trace.output, &targets)?;
        let (w_grads, _) = net.backward(&trace, &grad_out);
        for (acc, g) in net_grads.iter_mut().zip(&w_grads) {
            for (a, &v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
    }
    if net_grads.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("network gradient"));
    }

    let mut new_net = net.clone();
    for (layer, grads) in new_net.layers.iter_mut().zip(&net_grads) {
        for (w, &g) in layer.weights.iter_mut().zip(grads) {
            *w -= lr * g;
        }
    }

    let new_head = if update_head {
        let grads = head_gradient(head, &features, pseudo)?;
        if grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("head gradient"));
        }
        let mut h = head.clone();
        for (row, g_row) in h.w.iter_mut().zip(&grads) {
            for (w, &g) in row.iter_mut().zip(g_row) {
                *w -= lr * g;
            }
        }
        h
    } else {
        head.clone()
    };
    Ok((new_net, new_head))
}

/// Mechanical operation counting for the runtime model.
pub mod op_probe {
    use super::*;

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub struct OpCounts {
        pub multiplications: u64,
        pub activations: u64,
    }

    /// Execute the runtime-model propagation over a dense chain with the
    /// given neuron counts `n⁰..n^L`, counting every scalar multiply and
    /// activation call as it happens. The model charges layer 1 with its
    /// weight applied to the input vector and every later layer with the
    /// product of its weight matrix against the previous layer's weights,
    /// plus one activation per neuron per layer.
    pub fn probe_dense_chain_ops(layer_sizes: &[u64], seed: u64) -> Result<OpCounts> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::BadSizes(format!("{layer_sizes:?}")));
        }
        let sizes: Vec<usize> = layer_sizes.iter().map(|&n| n as usize).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let weights: Vec<Vec<f64>> = (1..sizes.len())
            .map(|l| (0..sizes[l] * sizes[l - 1]).map(|_| rng.gen_range(-0.1..0.1)).collect())
            .collect();
        let input: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut muls = 0u64;
        let mut acts = 0u64;
        let mut mul = |a: f64, b: f64| -> f64 {
            muls += 1;
            a * b
        };
        let mut activate = |v: f64| -> f64 {
            acts += 1;
            v.tanh()
        };

        // layer 1: weight times the input vector
        let mut column: Vec<f64> = vec![0.0; sizes[1]];
        for o in 0..sizes[1] {
            let mut acc = 0.0;
            for (i, &x) in input.iter().enumerate() {
                acc += mul(weights[0][o * sizes[0] + i], x);
            }
            column[o] = acc;
        }
        column = column.into_iter().map(&mut activate).collect();

        // every later layer: its weight matrix times the previous weight
        // matrix, then one activation per neuron
        for l in 2..sizes.len() {
            let (rows, mid, cols) = (sizes[l], sizes[l - 1], sizes[l - 2]);
            let mut product = vec![0.0; rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    let mut acc = 0.0;
                    for m in 0..mid {
                        acc += mul(weights[l - 1][r * mid + m], weights[l - 2][m * cols + c]);
                    }
                    product[r * cols + c] = acc;
                }
            }
            column = (0..rows).map(|r| activate(product[r * cols])).collect();
        }
        let _ = column;
        Ok(OpCounts { multiplications: muls, activations: acts })
    }
}
