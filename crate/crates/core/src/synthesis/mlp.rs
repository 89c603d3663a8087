//! Dense feed-forward networks with hand-written backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sigmoid inputs are clamped to this range.
pub const SIGMOID_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`, given `a = apply(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => {
                if z.abs() > SIGMOID_CLAMP {
                    0.0
                } else {
                    a * (1.0 - a)
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct MlpDoc {
    layers: Vec<LayerDoc>,
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpDoc", into = "MlpDoc")]
pub struct MlpNet {
    pub layers: Vec<DenseLayer>,
}

impl From<MlpNet> for MlpDoc {
    fn from(net: MlpNet) -> Self {
        MlpDoc {
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerDoc {
                    rows: l.weights.nrows(),
                    cols: l.weights.ncols(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

impl TryFrom<MlpDoc> for MlpNet {
    type Error = Error;

    fn try_from(doc: MlpDoc) -> Result<Self> {
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                if l.bias.len() != l.rows {
                    return Err(Error::contract("bias length differs from layer rows"));
                }
                Ok(DenseLayer {
                    weights: Array2::from_shape_vec((l.rows, l.cols), l.weights)
                        .map_err(|e| Error::contract(e.to_string()))?,
                    bias: Array1::from(l.bias),
                    activation: l.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MlpNet::from_layers(layers)
    }
}

/// Per-layer values recorded by [`MlpNet::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer.
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Array2<f64>>,
    /// Activation of each layer; the last entry is the network output.
    pub post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("network has at least one layer")
    }
}

/// Gradients shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl MlpGrads {
    pub fn zeros_like(net: &MlpNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    /// Flat parameter view in the order of [`MlpNet::param`].
    pub fn get(&self, idx: usize) -> f64 {
        let mut idx = idx;
        for (w, b) in &self.layers {
            if idx < w.len() {
                return w[[idx / w.ncols(), idx % w.ncols()]];
            }
            idx -= w.len();
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

impl MlpNet {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::contract(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        if layers
            .iter()
            .any(|l| l.bias.len() != l.output_dim() || l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()))
        {
            return Err(Error::contract("layer parameters malformed or non-finite"));
        }
        Ok(Self { layers })
    }

    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn init<R: Rng>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                DenseLayer {
                    weights: Array2::from_shape_simple_fn((fan_out, fan_in), || {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bound..bound)),
                    activation: if i + 2 == sizes.len() { output } else { hidden },
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat parameter access: each layer's weights row-major, then its bias.
    pub fn param(&self, idx: usize) -> f64 {
        let (layer, is_bias, off) = self.locate(idx);
        let l = &self.layers[layer];
        if is_bias {
            l.bias[off]
        } else {
            l.weights[[off / l.weights.ncols(), off % l.weights.ncols()]]
        }
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        let (layer, is_bias, off) = self.locate(idx);
        let l = &mut self.layers[layer];
        if is_bias {
            l.bias[off] = value;
        } else {
            let cols = l.weights.ncols();
            l.weights[[off / cols, off % cols]] = value;
        }
    }

    fn locate(&self, mut idx: usize) -> (usize, bool, usize) {
        for (i, l) in self.layers.iter().enumerate() {
            if idx < l.weights.len() {
                return (i, false, idx);
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return (i, true, idx);
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(batch)?;
        let mut a = batch.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericOverflow { layer: i });
            }
            a = z;
        }
        Ok(a)
    }

    pub fn forward_cached(&self, batch: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let n_layers = self.layers.len();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(n_layers),
            pre: Vec::with_capacity(n_layers),
            post: Vec::with_capacity(n_layers),
        };
        let mut a = batch.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            let out = z.mapv(|v| l.activation.apply(v));
            if out.iter().chain(z.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NumericOverflow { layer: i });
            }
            cache.inputs.push(a);
            cache.pre.push(z);
            a = out.clone();
            cache.post.push(out);
        }
        Ok(cache)
    }

    /// Backpropagates `grad_out` (gradient of the loss w.r.t. the network
    /// output). Returns parameter gradients and the gradient w.r.t. the input.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            ndarray::Zip::from(&mut delta)
                .and(&cache.pre[i])
                .and(&cache.post[i])
                .for_each(|d, &z, &a| *d *= l.activation.derivative(z, a));
            let gw = delta.t().dot(&cache.inputs[i]);
            let gb = delta.sum_axis(Axis(0));
            grads.push((gw, gb));
            delta = delta.dot(&l.weights);
        }
        grads.reverse();
        (MlpGrads { layers: grads }, delta)
    }

    /// Gradient w.r.t. the input only; parameter gradients are skipped.
    pub fn backward_input(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> Array2<f64> {
        let mut delta = grad_out.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            ndarray::Zip::from(&mut delta)
                .and(&cache.pre[i])
                .and(&cache.post[i])
                .for_each(|d, &z, &a| *d *= l.activation.derivative(z, a));
            delta = delta.dot(&l.weights);
        }
        delta
    }

    fn check_input(&self, batch: ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::contract(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}
