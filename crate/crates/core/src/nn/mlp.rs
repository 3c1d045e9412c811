use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};

static NEXT_TAG: AtomicU64 = AtomicU64::new(1);

fn fresh_tag() -> u64 {
    NEXT_TAG.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
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
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Squashing applied to one output unit before scaling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    Tanh,
    Sigmoid,
}

impl OutputActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Linear => z,
            OutputActivation::Tanh => z.tanh(),
            OutputActivation::Sigmoid => sigmoid(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            OutputActivation::Linear => 1.0,
            OutputActivation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            OutputActivation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            OutputActivation::Linear => 0,
            OutputActivation::Tanh => 1,
            OutputActivation::Sigmoid => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(OutputActivation::Linear),
            1 => Some(OutputActivation::Tanh),
            2 => Some(OutputActivation::Sigmoid),
            _ => None,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Architecture of an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    /// Widths from input to output, at least two entries.
    pub sizes: Vec<usize>,
    pub hidden: Activation,
    /// One entry per output unit.
    pub output: Vec<OutputActivation>,
    /// One entry per output unit.
    pub output_scale: Vec<f64>,
}

impl MlpSpec {
    /// Spec with the same squashing and unit scale on every output.
    pub fn uniform(sizes: Vec<usize>, hidden: Activation, output: OutputActivation) -> Self {
        let width = *sizes.last().unwrap_or(&0);
        Self {
            sizes,
            hidden,
            output: vec![output; width],
            output_scale: vec![1.0; width],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 {
            return Err(Error::invalid("sizes", "need at least an input and an output width"));
        }
        if self.sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("sizes", "layer widths must be positive"));
        }
        let width = *self.sizes.last().unwrap();
        if self.output.len() != width {
            return Err(Error::invalid("output", format!("{} activations for {width} outputs", self.output.len())));
        }
        if self.output_scale.len() != width {
            return Err(Error::invalid("output_scale", format!("{} scales for {width} outputs", self.output_scale.len())));
        }
        if self.output_scale.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("output_scale", "must be finite"));
        }
        Ok(())
    }
}

/// One affine layer. `weights` is `inputs × outputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Matrix,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(inputs, outputs),
            bias: Matrix::zeros(1, outputs),
        }
    }
}

/// Parameter gradients, laid out exactly like the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn iter(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias])
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    pub fn scale(&mut self, factor: f64) {
        self.iter_mut().for_each(|m| m.scale(factor));
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, g| m.max(g.max_abs()))
    }
}

/// Values retained by [`Mlp::forward`] for the matching backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    tag: u64,
    generation: u64,
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }
}

/// Fully connected feed-forward network with per-output squashing and scale.
#[derive(Debug)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Dense>,
    tag: u64,
    generation: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            layers: self.layers.clone(),
            tag: fresh_tag(),
            generation: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.layers == other.layers
    }
}

impl Mlp {
    /// All parameters zero.
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec.sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self {
            spec,
            layers,
            tag: fresh_tag(),
            generation: 0,
        })
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.weights.rows() as f64).sqrt();
            for v in layer.weights.data_mut().iter_mut().chain(layer.bias.data_mut()) {
                *v = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub(crate) fn from_parts(spec: MlpSpec, layers: Vec<Dense>) -> Result<Self> {
        spec.validate()?;
        if layers.len() + 1 != spec.sizes.len() {
            return Err(Error::Architecture(format!("{} layers for {} widths", layers.len(), spec.sizes.len())));
        }
        for (l, (layer, w)) in layers.iter().zip(spec.sizes.windows(2)).enumerate() {
            if layer.weights.shape() != (w[0], w[1]) || layer.bias.shape() != (1, w[1]) {
                return Err(Error::Architecture(format!("layer {l} parameter shapes do not match widths {w:?}")));
            }
        }
        Ok(Self {
            spec,
            layers,
            tag: fresh_tag(),
            generation: 0,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.spec.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.spec.sizes.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.params().map(|m| m.data().len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias])
    }

    /// Mutable access to every parameter. Invalidates outstanding caches.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.generation += 1;
        self.layers.iter_mut().flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(Matrix::is_finite)
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.spec == other.spec
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(|l| Dense::zeros(l.weights.rows(), l.weights.cols())).collect(),
        }
    }

    /// Evaluates a batch, one sample per row.
    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if input.cols() != self.input_width() {
            return Err(Error::shape("Mlp::forward", format!("{} input columns", self.input_width()), input.cols()));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = current.matmul(&layer.weights)?;
            z.add_row_broadcast(layer.bias.data());
            let next = if l == last {
                self.squash_output(&z)
            } else {
                let act = self.spec.hidden;
                z.map(|v| act.apply(v))
            };
            inputs.push(current);
            pre.push(z);
            current = next;
        }
        let cache = ForwardCache {
            tag: self.tag,
            generation: self.generation,
            inputs,
            pre,
        };
        Ok((current, cache))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.input_width() {
            return Err(Error::shape("Mlp::predict", format!("{} input columns", self.input_width()), input.cols()));
        }
        let last = self.layers.len() - 1;
        let mut current = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = current.matmul(&layer.weights)?;
            z.add_row_broadcast(layer.bias.data());
            current = if l == last {
                self.squash_output(&z)
            } else {
                let act = self.spec.hidden;
                z.map(|v| act.apply(v))
            };
        }
        Ok(current)
    }

    /// Convenience for a single sample.
    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict(&Matrix::row_vector(input))?.into_vec())
    }

    fn squash_output(&self, z: &Matrix) -> Matrix {
        let mut out = z.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = self.spec.output_scale[j] * self.spec.output[j].apply(*v);
            }
        }
        out
    }

    /// Back-propagates `output_grad` (∂L/∂output, same shape as the output).
    /// Returns parameter gradients and ∂L/∂input.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &Matrix) -> Result<(Gradients, Matrix)> {
        if cache.tag != self.tag {
            return Err(Error::StaleCache("cache came from a different network"));
        }
        if cache.generation != self.generation {
            return Err(Error::StaleCache("parameters changed since the forward pass"));
        }
        let batch = cache.batch_size();
        if output_grad.shape() != (batch, self.output_width()) {
            return Err(Error::shape(
                "Mlp::backward",
                format!("{batch}x{}", self.output_width()),
                format!("{}x{}", output_grad.rows(), output_grad.cols()),
            ));
        }
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let z = &cache.pre[l];
            let mut dz = upstream;
            if l == last {
                for i in 0..dz.rows() {
                    let zr = z.row(i);
                    for (j, g) in dz.row_mut(i).iter_mut().enumerate() {
                        *g *= self.spec.output_scale[j] * self.spec.output[j].derivative(zr[j]);
                    }
                }
            } else {
                let act = self.spec.hidden;
                for (g, &zv) in dz.data_mut().iter_mut().zip(z.data()) {
                    *g *= act.derivative(zv);
                }
            }
            let weights = cache.inputs[l].t_matmul(&dz)?;
            let bias = dz.sum_rows();
            upstream = dz.matmul_t(&self.layers[l].weights)?;
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }
}
