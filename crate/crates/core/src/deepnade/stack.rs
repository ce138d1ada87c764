use rand::Rng;

use crate::error::{ensure_len, Error, Result};
use crate::math::{axpy, init_bound, sigmoid, Activation, Matrix};
use crate::params::{BlockRole, BlockSpec, ParamBlocks};

/// One dense layer: `h = act(W h_prev + b)` with `W` of shape out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        Layer {
            w: Matrix::uniform(outputs, inputs, init_bound(inputs), rng),
            b: vec![0.0; outputs],
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Layer {
            w: Matrix::zeros(outputs, inputs),
            b: vec![0.0; outputs],
            activation,
        }
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.w.cols()
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        self.w.rows()
    }
}

/// Feed-forward network mapping a masked input to `D` predictive probabilities.
///
/// The final layer always has `D` sigmoid outputs. With `mask_concat`, the
/// input is the masked vector followed by the mask itself (width `2D`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub dim: usize,
    pub mask_concat: bool,
    pub layers: Vec<Layer>,
}

/// Conditioning pattern: `m[i] = 1` for observed (conditioned-on) dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    m: Vec<bool>,
}

impl Mask {
    pub fn new(m: Vec<bool>) -> Self {
        Mask { m }
    }

    pub fn empty(d: usize) -> Self {
        Mask { m: vec![false; d] }
    }

    /// Parses a 0/1 vector.
    pub fn from_f64(v: &[f64]) -> Result<Self> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| match x {
                x if x == 0.0 => Ok(false),
                x if x == 1.0 => Ok(true),
                _ => Err(Error::Domain(format!("mask entry {i} = {x} is not binary"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Mask::new)
    }

    /// Mask with ones at the listed dimensions.
    pub fn from_prefix(d: usize, prefix: &[usize]) -> Self {
        let mut m = vec![false; d];
        for &i in prefix {
            m[i] = true;
        }
        Mask { m }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    #[inline]
    pub fn is_observed(&self, i: usize) -> bool {
        self.m[i]
    }

    pub fn set(&mut self, i: usize, observed: bool) {
        self.m[i] = observed;
    }

    pub fn observed_count(&self) -> usize {
        self.m.iter().filter(|&&b| b).count()
    }

    /// Position `d` (1-based) of the next dimension to predict: observed count + 1.
    pub fn next_position(&self) -> usize {
        self.observed_count() + 1
    }

    pub fn missing(&self) -> Vec<usize> {
        (0..self.m.len()).filter(|&i| !self.m[i]).collect()
    }

    pub fn observed(&self) -> Vec<usize> {
        (0..self.m.len()).filter(|&i| self.m[i]).collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.m.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Activations of every layer for one forward pass (`h[0]` is the network input).
#[derive(Debug, Clone)]
pub struct StackTrace {
    pub a: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl StackTrace {
    pub fn output(&self) -> &[f64] {
        self.h.last().expect("non-empty trace")
    }
}

impl LayerStack {
    /// Random stack with the given hidden widths; final layer maps to `dim` sigmoid outputs.
    pub fn init<R: Rng + ?Sized>(
        dim: usize,
        hidden: &[usize],
        activation: Activation,
        mask_concat: bool,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = if mask_concat { 2 * dim } else { dim };
        for &hw in hidden {
            layers.push(Layer::init(width, hw, activation, rng));
            width = hw;
        }
        layers.push(Layer::init(width, dim, Activation::Sigmoid, rng));
        LayerStack {
            dim,
            mask_concat,
            layers,
        }
    }

    pub fn zeros(dim: usize, hidden: &[usize], activation: Activation, mask_concat: bool) -> Self {
        let mut layers = Vec::new();
        let mut width = if mask_concat { 2 * dim } else { dim };
        for &hw in hidden {
            layers.push(Layer::zeros(width, hw, activation));
            width = hw;
        }
        layers.push(Layer::zeros(width, dim, Activation::Sigmoid));
        LayerStack {
            dim,
            mask_concat,
            layers,
        }
    }

    pub fn input_width(&self) -> usize {
        if self.mask_concat {
            2 * self.dim
        } else {
            self.dim
        }
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::outputs)
            .collect()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let mut width = self.input_width();
        if self.layers.is_empty() {
            return Err(Error::Contract("layer stack has no layers".into()));
        }
        for layer in &self.layers {
            ensure_len("layer input width", width, layer.inputs())?;
            ensure_len("layer bias", layer.outputs(), layer.b.len())?;
            width = layer.outputs();
        }
        ensure_len("output width", self.dim, width)?;
        if self.layers.last().map(|l| l.activation) != Some(Activation::Sigmoid) {
            return Err(Error::Contract("final layer must be sigmoid".into()));
        }
        Ok(())
    }

    /// Network input `x ⊙ m`, optionally followed by `m`.
    pub fn input(&self, x: &[f64], mask: &Mask) -> Vec<f64> {
        let mut h0 = Vec::with_capacity(self.input_width());
        h0.extend(x.iter().enumerate().map(|(i, &v)| if mask.is_observed(i) { v } else { 0.0 }));
        if self.mask_concat {
            h0.extend(mask.as_f64());
        }
        h0
    }

    pub(crate) fn check_io(&self, x: &[f64], mask: &Mask) -> Result<()> {
        ensure_len("input", self.dim, x.len())?;
        ensure_len("mask", self.dim, mask.len())
    }

    /// Forward pass keeping every layer's activations.
    pub fn forward_trace(&self, x: &[f64], mask: &Mask) -> Result<StackTrace> {
        self.check_io(x, mask)?;
        let mut trace = StackTrace {
            a: Vec::with_capacity(self.layers.len()),
            h: Vec::with_capacity(self.layers.len() + 1),
        };
        trace.h.push(self.input(x, mask));
        for layer in &self.layers {
            let prev = trace.h.last().expect("input present");
            let mut a = layer.b.clone();
            for (ai, row) in a.iter_mut().zip(layer.w.as_slice().chunks_exact(layer.inputs())) {
                *ai += crate::math::dot(row, prev);
            }
            let h = a.iter().map(|&v| layer.activation.apply(v)).collect();
            trace.a.push(a);
            trace.h.push(h);
        }
        Ok(trace)
    }

    /// Predictive probability of every dimension being 1 given the observed ones.
    ///
    /// Outputs at observed positions carry no meaning.
    pub fn forward(&self, x: &[f64], mask: &Mask) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x, mask)?.h.pop().expect("output layer"))
    }

    /// Backpropagates `d_out` (gradient w.r.t. final pre-activations) into `grad`.
    pub(crate) fn backward(&self, trace: &StackTrace, d_out: Vec<f64>, grad: &mut LayerStack) {
        let mut delta = d_out;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let prev = &trace.h[l];
            let gl = &mut grad.layers[l];
            axpy(1.0, &delta, &mut gl.b);
            gl.w.rank1_acc(1.0, &delta, prev);
            if l == 0 {
                break;
            }
            let mut d_prev = vec![0.0; layer.inputs()];
            layer.w.matvec_t_acc(&delta, &mut d_prev);
            let below = &self.layers[l - 1];
            for (k, dp) in d_prev.iter_mut().enumerate() {
                *dp *= below.activation.derivative(trace.a[l - 1][k], trace.h[l][k]);
            }
            delta = d_prev;
        }
    }

    pub fn zeros_like(&self) -> LayerStack {
        LayerStack {
            dim: self.dim,
            mask_concat: self.mask_concat,
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs(), l.outputs(), l.activation))
                .collect(),
        }
    }
}

/// Incremental conditional evaluator: reveals one dimension at a time and
/// updates the first layer's pre-activation with a rank-one column update.
pub(crate) struct Autoregressor<'a> {
    stack: &'a LayerStack,
    /// First-layer weights transposed: row `j` is input column `j`.
    w0_t: Matrix,
    a0: Vec<f64>,
    scratch: Vec<Vec<f64>>,
}

impl<'a> Autoregressor<'a> {
    pub(crate) fn new(stack: &'a LayerStack, x: &[f64], mask: &Mask) -> Self {
        let first = &stack.layers[0];
        let h0 = stack.input(x, mask);
        let mut a0 = first.b.clone();
        for (ai, row) in a0.iter_mut().zip(first.w.as_slice().chunks_exact(first.inputs())) {
            *ai += crate::math::dot(row, &h0);
        }
        let scratch = stack.layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
        Autoregressor {
            stack,
            w0_t: first.w.transpose(),
            a0,
            scratch,
        }
    }

    /// `p(x_i = 1 | observed so far)`.
    pub(crate) fn predict(&mut self, i: usize) -> f64 {
        let layers = &self.stack.layers;
        if layers.len() == 1 {
            return sigmoid(self.a0[i]);
        }
        let act = layers[0].activation;
        for (h, &a) in self.scratch[0].iter_mut().zip(&self.a0) {
            *h = act.apply(a);
        }
        for l in 1..layers.len() - 1 {
            let (done, rest) = self.scratch.split_at_mut(l);
            let prev = &done[l - 1];
            let out = &mut rest[0];
            let layer = &layers[l];
            for (o, (row, &b)) in out
                .iter_mut()
                .zip(layer.w.as_slice().chunks_exact(layer.inputs()).zip(&layer.b))
            {
                *o = layer.activation.apply(b + crate::math::dot(row, prev));
            }
        }
        let last = layers.last().expect("output layer");
        let prev = &self.scratch[layers.len() - 2];
        sigmoid(last.b[i] + crate::math::dot(last.w.row(i), prev))
    }

    /// Marks dimension `i` observed with value `v`.
    pub(crate) fn reveal(&mut self, i: usize, v: f64) {
        if v != 0.0 {
            axpy(v, self.w0_t.row(i), &mut self.a0);
        }
        if self.stack.mask_concat {
            axpy(1.0, self.w0_t.row(self.stack.dim + i), &mut self.a0);
        }
    }
}

impl ParamBlocks for LayerStack {
    fn block_specs(&self) -> Vec<BlockSpec> {
        let mut specs = Vec::with_capacity(2 * self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let role = if l == 0 {
                BlockRole::InputHidden
            } else {
                BlockRole::Other
            };
            specs.push(BlockSpec::new(format!("W{}", l + 1), layer.w.as_slice().len(), role));
            specs.push(BlockSpec::new(format!("b{}", l + 1), layer.b.len(), BlockRole::Other));
        }
        specs
    }

    fn blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.as_slice(), l.b.as_slice()])
            .collect()
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()])
            .collect()
    }
}
