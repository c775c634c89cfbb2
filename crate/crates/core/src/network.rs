//! Dense feedforward network with LeakyReLU hidden layers and a linear head.
//!
//! The reference shape maps one input (normalized playback time) through
//! hidden layers of 75 and 50 units to `n + 1` outputs: one per joint plus
//! an end-of-motion score. Training uses `J = 1/(2m) Σ‖y − f(x)‖²` and
//! gradients propagated layer by layer with the chain rule.
//!
//! Weight file format:
//!
//! ```text
//! mimicnet layers=<k> input=<d> alpha=<float>
//! layer out=<o> in=<i> act=<leakyrelu|linear>
//! <o lines of i weights>
//! <one line of o biases>
//! ...
//! ```

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MimicError, Result};
use crate::textio::{content_lines, expect_key, fmt_f64, parse_f64, parse_usize};

pub const DEFAULT_ALPHA: f64 = 0.01;

pub fn leaky_relu(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

/// Derivative with the kink at 0 assigned slope 1.
fn leaky_relu_slope(z: f64, alpha: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Linear,
}

impl Activation {
    fn name(self) -> &'static str {
        match self {
            Activation::LeakyRelu => "leakyrelu",
            Activation::Linear => "linear",
        }
    }
}

/// Layer sizes and activations, e.g. `1:75:50:23`.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input: usize,
    pub layers: Vec<(usize, Activation)>,
    pub alpha: f64,
}

impl Architecture {
    /// Hidden layers use LeakyReLU, the last layer is linear.
    pub fn mlp(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(MimicError::Config(
                "architecture needs an input size and at least one layer".into(),
            ));
        }
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(MimicError::Config(format!(
                "layer size at position {pos} is zero"
            )));
        }
        let last = sizes.len() - 2;
        let layers = sizes[1..]
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let act = if i == last {
                    Activation::Linear
                } else {
                    Activation::LeakyRelu
                };
                (s, act)
            })
            .collect();
        Ok(Self {
            input: sizes[0],
            layers,
            alpha: DEFAULT_ALPHA,
        })
    }

    /// `1:75:50:23`.
    pub fn reference() -> Self {
        Self::for_joints(22)
    }

    /// The reference hidden stack with `joints + 1` outputs.
    pub fn for_joints(joints: usize) -> Self {
        Self::mlp(&[1, 75, 50, joints + 1]).expect("static sizes are non-zero")
    }

    pub fn output(&self) -> usize {
        self.layers.last().map_or(self.input, |l| l.0)
    }
}

impl FromStr for Architecture {
    type Err = MimicError;

    fn from_str(s: &str) -> Result<Self> {
        let sizes = s
            .split(':')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| MimicError::Config(format!("bad layer size `{tok}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::mlp(&sizes)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.input)?;
        for (size, _) in &self.layers {
            write!(f, ":{size}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs × inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        outputs: usize,
        inputs: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if outputs == 0 || inputs == 0 {
            return Err(MimicError::Config("layer with zero size".into()));
        }
        if weights.len() != outputs * inputs {
            return Err(MimicError::shape(
                "layer weights",
                outputs * inputs,
                weights.len(),
            ));
        }
        if biases.len() != outputs {
            return Err(MimicError::shape("layer biases", outputs, biases.len()));
        }
        if weights.iter().chain(&biases).any(|p| !p.is_finite()) {
            return Err(MimicError::Config("layer parameters must be finite".into()));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            biases,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.outputs * self.inputs + self.outputs
    }

    /// Writes pre-activations into `z`.
    fn affine(&self, x: &[f64], z: &mut [f64]) {
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *zo = row
                .iter()
                .zip(x)
                .fold(self.biases[o], |acc, (w, xi)| acc + w * xi);
        }
    }

    fn activate(&self, z: &[f64], a: &mut [f64], alpha: f64) {
        match self.activation {
            Activation::LeakyRelu => {
                for (ai, &zi) in a.iter_mut().zip(z) {
                    *ai = leaky_relu(zi, alpha);
                }
            }
            Activation::Linear => a.copy_from_slice(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradients laid out exactly like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGradient>,
}

impl GradientSet {
    pub fn zeros_like(net: &MimicNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.weights.iter().chain(&l.biases).any(|g| !g.is_finite()))
    }

    /// Flattened in [`MimicNetwork::param_vector`] order.
    pub fn to_vector(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCount {
    pub per_layer: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MimicNetwork {
    input_dim: usize,
    alpha: f64,
    layers: Vec<DenseLayer>,
}

impl MimicNetwork {
    pub fn new(input_dim: usize, alpha: f64, layers: Vec<DenseLayer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(MimicError::Config(
                "input dimension must be positive".into(),
            ));
        }
        if layers.is_empty() {
            return Err(MimicError::Config(
                "network needs at least one layer".into(),
            ));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(MimicError::Config(format!(
                "LeakyReLU alpha must be > 0, got {alpha}"
            )));
        }
        let mut width = input_dim;
        for layer in &layers {
            if layer.inputs != width {
                return Err(MimicError::shape("layer chaining", width, layer.inputs));
            }
            width = layer.outputs;
        }
        Ok(Self {
            input_dim,
            alpha,
            layers,
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero biases.
    pub fn initialize(arch: &Architecture, seed: u64) -> Result<Self> {
        if arch.layers.is_empty() || arch.input == 0 || arch.layers.iter().any(|l| l.0 == 0) {
            return Err(MimicError::Config(format!("invalid architecture {arch}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = arch.input;
        let mut layers = Vec::with_capacity(arch.layers.len());
        for &(outputs, activation) in &arch.layers {
            let bound = (6.0 / (inputs + outputs) as f64).sqrt();
            let weights = (0..outputs * inputs)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            layers.push(DenseLayer::new(
                outputs,
                inputs,
                weights,
                vec![0.0; outputs],
                activation,
            )?);
            inputs = outputs;
        }
        Self::new(arch.input, arch.alpha, layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| (l.outputs, l.activation))
                .collect(),
            alpha: self.alpha,
        }
    }

    pub fn param_count(&self) -> ParamCount {
        let per_layer: Vec<usize> = self.layers.iter().map(DenseLayer::param_count).collect();
        let total = per_layer.iter().sum();
        ParamCount { per_layer, total }
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn param_vector(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_param_vector(&mut self, params: &[f64]) -> Result<()> {
        let total = self.param_count().total;
        if params.len() != total {
            return Err(MimicError::shape("parameter vector", total, params.len()));
        }
        let mut rest = params;
        for layer in &mut self.layers {
            let (w, tail) = rest.split_at(layer.weights.len());
            let (b, tail) = tail.split_at(layer.biases.len());
            layer.weights.copy_from_slice(w);
            layer.biases.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(MimicError::shape("network input", self.input_dim, x.len()));
        }
        let mut a = x.to_vec();
        for layer in &self.layers {
            let mut z = vec![0.0; layer.outputs];
            layer.affine(&a, &mut z);
            let mut next = vec![0.0; layer.outputs];
            layer.activate(&z, &mut next, self.alpha);
            a = next;
        }
        Ok(a)
    }

    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    /// Loss and exact parameter gradients for the full batch.
    pub fn backward(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<(f64, GradientSet)> {
        let pass = self.backward_with_predictions(xs, ys)?;
        Ok((pass.loss, pass.grads))
    }

    /// Like [`Self::backward`], also returning the forward outputs.
    pub fn backward_with_predictions(
        &self,
        xs: &[Vec<f64>],
        ys: &[Vec<f64>],
    ) -> Result<BackwardPass> {
        if xs.is_empty() {
            return Err(MimicError::shape("batch size", 1, 0));
        }
        if xs.len() != ys.len() {
            return Err(MimicError::shape("batch targets", xs.len(), ys.len()));
        }
        let out_dim = self.output_dim();
        for (x, y) in xs.iter().zip(ys) {
            if x.len() != self.input_dim {
                return Err(MimicError::shape("network input", self.input_dim, x.len()));
            }
            if y.len() != out_dim {
                return Err(MimicError::shape("network target", out_dim, y.len()));
            }
        }

        let m = xs.len() as f64;
        let depth = self.layers.len();
        let mut grads = GradientSet::zeros_like(self);
        let mut predictions = Vec::with_capacity(xs.len());
        let mut sq_sum = 0.0;

        // acts[0] is the input, acts[l + 1] the output of layer l.
        let mut acts: Vec<Vec<f64>> = std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(|l| l.outputs))
            .map(|w| vec![0.0; w])
            .collect();
        let mut pre: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        let max_width = acts.iter().map(Vec::len).max().unwrap_or(0);
        let mut delta = vec![0.0; max_width];
        let mut upstream = vec![0.0; max_width];

        for (x, y) in xs.iter().zip(ys) {
            acts[0].copy_from_slice(x);
            for (l, layer) in self.layers.iter().enumerate() {
                let (before, after) = acts.split_at_mut(l + 1);
                layer.affine(&before[l], &mut pre[l]);
                layer.activate(&pre[l], &mut after[0], self.alpha);
            }

            let out = &acts[depth];
            let d = &mut delta[..out_dim];
            for ((di, &f), &t) in d.iter_mut().zip(out).zip(y) {
                let r = f - t;
                sq_sum += r * r;
                *di = r / m;
            }
            predictions.push(out.clone());

            // `delta` holds dJ/da for the current layer's output on entry.
            for l in (0..depth).rev() {
                let layer = &self.layers[l];
                let d = &mut delta[..layer.outputs];
                if layer.activation == Activation::LeakyRelu {
                    for (di, &z) in d.iter_mut().zip(&pre[l]) {
                        *di *= leaky_relu_slope(z, self.alpha);
                    }
                }
                let g = &mut grads.layers[l];
                let input = &acts[l];
                for (o, &dout) in d.iter().enumerate() {
                    g.biases[o] += dout;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &xi) in row.iter_mut().zip(input) {
                        *gw += dout * xi;
                    }
                }
                if l > 0 {
                    let up = &mut upstream[..layer.inputs];
                    up.fill(0.0);
                    for (o, &dout) in d.iter().enumerate() {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (u, &w) in up.iter_mut().zip(row) {
                            *u += w * dout;
                        }
                    }
                    delta[..layer.inputs].copy_from_slice(up);
                }
            }
        }

        Ok(BackwardPass {
            loss: sq_sum / (2.0 * m),
            grads,
            predictions,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (hl, header) = lines
            .next()
            .ok_or_else(|| MimicError::parse(1, "empty weight file"))?;
        let f: Vec<&str> = header.split(' ').collect();
        if f.len() != 4 || f[0] != "mimicnet" {
            return Err(MimicError::parse(
                hl,
                "expected `mimicnet layers=<k> input=<d> alpha=<float>`",
            ));
        }
        let count = parse_usize(expect_key(f[1], "layers", hl)?, hl)?;
        let input = parse_usize(expect_key(f[2], "input", hl)?, hl)?;
        let alpha = parse_f64(expect_key(f[3], "alpha", hl)?, hl)?;

        let mut last_line = hl;
        let mut next_line = |what: &str| -> Result<(usize, &str)> {
            match lines.next() {
                Some((n, l)) => {
                    last_line = n;
                    Ok((n, l))
                }
                None => Err(MimicError::parse(last_line + 1, format!("missing {what}"))),
            }
        };
        let parse_row = |lineno: usize, line: &str, len: usize| -> Result<Vec<f64>> {
            let row = line
                .split(' ')
                .map(|t| parse_f64(t, lineno))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != len {
                return Err(MimicError::parse(
                    lineno,
                    format!("expected {len} values, got {}", row.len()),
                ));
            }
            Ok(row)
        };

        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (ll, line) = next_line("layer header")?;
            let f: Vec<&str> = line.split(' ').collect();
            if f.len() != 4 || f[0] != "layer" {
                return Err(MimicError::parse(
                    ll,
                    "expected `layer out=<o> in=<i> act=<leakyrelu|linear>`",
                ));
            }
            let out = parse_usize(expect_key(f[1], "out", ll)?, ll)?;
            let inp = parse_usize(expect_key(f[2], "in", ll)?, ll)?;
            let activation = match expect_key(f[3], "act", ll)? {
                "leakyrelu" => Activation::LeakyRelu,
                "linear" => Activation::Linear,
                other => {
                    return Err(MimicError::parse(
                        ll,
                        format!("unknown activation `{other}`"),
                    ))
                }
            };
            let mut weights = Vec::with_capacity(out * inp);
            for _ in 0..out {
                let (n, l) = next_line("weight row")?;
                weights.extend(parse_row(n, l, inp)?);
            }
            let (n, l) = next_line("bias row")?;
            let biases = parse_row(n, l, out)?;
            layers.push(
                DenseLayer::new(out, inp, weights, biases, activation)
                    .map_err(|e| MimicError::parse(ll, e.to_string()))?,
            );
        }
        if let Some((n, _)) = lines.next() {
            return Err(MimicError::parse(n, "trailing content after last layer"));
        }
        Self::new(input, alpha, layers).map_err(|e| MimicError::parse(hl, e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let join = |vals: &[f64]| {
            vals.iter()
                .map(|&v| fmt_f64(v))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = format!(
            "mimicnet layers={} input={} alpha={}\n",
            self.layers.len(),
            self.input_dim,
            fmt_f64(self.alpha)
        );
        for layer in &self.layers {
            out.push_str(&format!(
                "layer out={} in={} act={}\n",
                layer.outputs,
                layer.inputs,
                layer.activation.name()
            ));
            for row in layer.weights.chunks(layer.inputs) {
                out.push_str(&join(row));
                out.push('\n');
            }
            out.push_str(&join(&layer.biases));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BackwardPass {
    pub loss: f64,
    pub grads: GradientSet,
    pub predictions: Vec<Vec<f64>>,
}

/// `(1/2m) Σᵢ ‖predᵢ − targetᵢ‖²`.
pub fn mse_loss(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    if pred.is_empty() {
        return Err(MimicError::shape("batch size", 1, 0));
    }
    if pred.len() != target.len() {
        return Err(MimicError::shape("loss batch", pred.len(), target.len()));
    }
    let mut sum = 0.0;
    for (p, t) in pred.iter().zip(target) {
        if p.len() != t.len() {
            return Err(MimicError::shape("loss sample", p.len(), t.len()));
        }
        sum += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(sum / (2.0 * pred.len() as f64))
}
