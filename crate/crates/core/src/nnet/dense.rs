use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu { negative_slope: f64 },
    Tanh,
    Exp,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu { negative_slope } => {
                if x > 0.0 {
                    x
                } else {
                    negative_slope * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Exp => x.exp(),
        }
    }

    fn apply_graph(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::LeakyRelu { negative_slope } => g.leaky_relu(x, negative_slope),
            Activation::Tanh => g.tanh(x),
            Activation::Exp => g.exp(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Fully connected feed-forward network with optional parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Checkpoint", into = "Checkpoint")]
pub struct DenseNet {
    layers: Vec<Layer>,
    clamp: Option<(f64, f64)>,
}

/// Gradients from a single forward/backward pass.
#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub output: Vec<f64>,
    pub param_grad: Vec<f64>,
    pub input_grad: Vec<f64>,
}

impl DenseNet {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for every
    /// weight and bias. `hidden` is applied after every layer but the last.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Parameter(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
                activation: if i + 1 == n { output } else { hidden },
            })
            .collect();
        Ok(DenseNet { layers, clamp: None })
    }

    pub fn with_clamp(mut self, low: f64, high: f64) -> Self {
        self.clamp = Some((low, high));
        self.apply_clamp();
        self
    }

    pub fn clamp_bounds(&self) -> Option<(f64, f64)> {
        self.clamp
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Project every parameter into `[low, high]`.
    pub fn clamp_params(&mut self, low: f64, high: f64) {
        debug_assert!(low <= high);
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = w.clamp(low, high);
            }
        }
    }

    /// Clamp into the network's own bounds, if any.
    pub fn apply_clamp(&mut self) {
        if let Some((lo, hi)) = self.clamp {
            self.clamp_params(lo, hi);
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let mut x = input.to_vec();
        for l in &self.layers {
            x = (0..l.outputs)
                .map(|o| {
                    let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                    let z = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + l.bias[o];
                    l.activation.apply(z)
                })
                .collect();
        }
        Ok(x)
    }

    /// Scalar-output convenience.
    pub fn forward_scalar(&self, input: &[f64]) -> Result<f64> {
        Ok(self.forward(input)?[0])
    }

    /// Record the forward pass on `g`; `params` must come from
    /// [`DenseNet::param_vars`] (or any vars laid out like [`DenseNet::params`]).
    pub fn forward_graph(&self, g: &mut Graph, params: &[Var], input: &[Var]) -> Vec<Var> {
        debug_assert_eq!(params.len(), self.param_count());
        debug_assert_eq!(input.len(), self.input_dim());
        let mut x: Vec<Var> = input.to_vec();
        let mut off = 0;
        for l in &self.layers {
            let w = &params[off..off + l.weights.len()];
            off += l.weights.len();
            let b = &params[off..off + l.bias.len()];
            off += l.bias.len();
            x = (0..l.outputs)
                .map(|o| {
                    let mut acc = b[o];
                    for i in 0..l.inputs {
                        let t = g.mul(w[o * l.inputs + i], x[i]);
                        acc = g.add(acc, t);
                    }
                    l.activation.apply_graph(g, acc)
                })
                .collect();
        }
        x
    }

    pub fn param_vars(&self, g: &mut Graph) -> Vec<Var> {
        g.inputs(&self.params())
    }

    /// One forward pass plus a reverse sweep seeded with `output_adjoint`.
    pub fn forward_backward(&self, input: &[f64], output_adjoint: &[f64]) -> Result<ForwardBackward> {
        self.check_input(input.len())?;
        if output_adjoint.len() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "output adjoint has length {}, network outputs {}",
                output_adjoint.len(),
                self.output_dim()
            )));
        }
        let mut g = Graph::new();
        let p = self.param_vars(&mut g);
        let x = g.inputs(input);
        let out = self.forward_graph(&mut g, &p, &x);
        let seeds: Vec<_> = out.iter().copied().zip(output_adjoint.iter().copied()).collect();
        let grads = g.backward_seeded(&seeds);
        Ok(ForwardBackward {
            output: g.values(&out),
            param_grad: grads.wrt_all(&p),
            input_grad: grads.wrt_all(&x),
        })
    }

    fn check_input(&self, n: usize) -> Result<()> {
        if n != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network expects input of length {}, got {n}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Free-function form used by solvers.
pub fn clamp_params(net: &mut DenseNet, low: f64, high: f64) {
    net.clamp_params(low, high);
}

/// JSON checkpoint layout: layer sizes, per-layer row-major weights and
/// biases, activations and optional clamp bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    clamp: Option<(f64, f64)>,
}

impl From<DenseNet> for Checkpoint {
    fn from(net: DenseNet) -> Self {
        Checkpoint {
            layer_sizes: net.layer_sizes(),
            activations: net.layers.iter().map(|l| l.activation).collect(),
            weights: net.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: net.layers.iter().map(|l| l.bias.clone()).collect(),
            clamp: net.clamp,
        }
    }
}

impl TryFrom<Checkpoint> for DenseNet {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        let n = c.layer_sizes.len().saturating_sub(1);
        if n == 0 || c.activations.len() != n || c.weights.len() != n || c.biases.len() != n {
            return Err(Error::Parameter("inconsistent network checkpoint".into()));
        }
        let mut layers = Vec::with_capacity(n);
        for i in 0..n {
            let (inputs, outputs) = (c.layer_sizes[i], c.layer_sizes[i + 1]);
            if c.weights[i].len() != inputs * outputs || c.biases[i].len() != outputs {
                return Err(Error::Parameter(format!("layer {i} has wrong parameter count")));
            }
            if c.weights[i].iter().chain(&c.biases[i]).any(|w| !w.is_finite()) {
                return Err(Error::Numeric(format!("layer {i} has non-finite parameters")));
            }
            layers.push(Layer {
                inputs,
                outputs,
                weights: c.weights[i].clone(),
                bias: c.biases[i].clone(),
                activation: c.activations[i],
            });
        }
        if let Some((lo, hi)) = c.clamp {
            if lo > hi {
                return Err(Error::Parameter("clamp low exceeds high".into()));
            }
        }
        Ok(DenseNet { layers, clamp: c.clamp })
    }
}
