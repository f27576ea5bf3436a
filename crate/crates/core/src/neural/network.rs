//! Fully convolutional allocator: stacked contracting/expanding series with
//! tanh activations, a 1x1 logit projection and a per-item softmax over agents.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::encode::{InputTensor, INPUT_CHANNELS};
use super::layers::{flush, LayerKind, LayerSpec, Scalar, Shape};
use crate::error::{Error, Result};
use crate::instance::{Allocation, FractionalAllocation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub series: usize,
    pub convs_per_series: usize,
    pub hidden_channels: usize,
    pub kernel: usize,
    pub temperature: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self { series: 3, convs_per_series: 4, hidden_channels: 32, kernel: 3, temperature: 0.01 }
    }
}

impl ArchConfig {
    /// Smallest agent count whose height survives the contracting convolutions.
    pub fn min_agents(&self) -> usize {
        self.convs_per_series * (self.kernel - 1) + 1
    }

    pub fn min_items(&self) -> usize {
        self.min_agents()
    }

    pub fn validate(&self) -> Result<()> {
        if self.series == 0 || self.convs_per_series == 0 || self.hidden_channels == 0 {
            return Err(Error::Config("series, convs per series and hidden channels must be positive".into()));
        }
        if self.kernel != 3 {
            return Err(Error::Config(format!("only 3x3 kernels are supported, got {}", self.kernel)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        Ok(())
    }

    pub fn check_input(&self, agents: usize, items: usize) -> Result<()> {
        if agents < self.min_agents() {
            return Err(Error::InfeasibleHeight { agents, min_agents: self.min_agents() });
        }
        if items < self.min_items() {
            return Err(Error::Config(format!(
                "network needs at least {} items for this architecture, got {items}",
                self.min_items()
            )));
        }
        Ok(())
    }

    /// Layer stack in evaluation order.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut out = Vec::with_capacity(2 * self.series * self.convs_per_series + 1);
        let h = self.hidden_channels;
        for s in 0..self.series {
            for c in 0..self.convs_per_series {
                let cin = if s == 0 && c == 0 { INPUT_CHANNELS } else { h };
                out.push(LayerSpec { kind: LayerKind::Conv, in_channels: cin, out_channels: h, kernel: self.kernel });
            }
            for _ in 0..self.convs_per_series {
                out.push(LayerSpec { kind: LayerKind::UpConv, in_channels: h, out_channels: h, kernel: self.kernel });
            }
        }
        out.push(LayerSpec { kind: LayerKind::Project, in_channels: h, out_channels: 1, kernel: 1 });
        out
    }
}

/// Where each layer's weights and biases live in the flat parameter vector.
#[derive(Debug, Clone)]
pub struct Layout {
    pub slots: Vec<(LayerSpec, Range<usize>, Range<usize>)>,
    pub len: usize,
}

impl Layout {
    pub fn new(arch: &ArchConfig) -> Self {
        let mut offset = 0;
        let slots = arch
            .layers()
            .into_iter()
            .map(|spec| {
                let w = offset..offset + spec.weight_len();
                let b = w.end..w.end + spec.out_channels;
                offset = b.end;
                (spec, w, b)
            })
            .collect();
        Self { slots, len: offset }
    }
}

/// Activations recorded during a forward pass, for backpropagation.
pub struct Trace<T> {
    pub shapes: Vec<Shape>,
    /// `acts[0]` is the input; `acts[l + 1]` is the output of layer `l`.
    pub acts: Vec<Vec<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn logits(&self) -> &[T] {
        self.acts.last().expect("non-empty trace")
    }
}

pub fn forward_trace<T: Scalar>(
    arch: &ArchConfig,
    layout: &Layout,
    weights: &[T],
    input: &InputTensor,
) -> Result<Trace<T>> {
    arch.check_input(input.agents(), input.items())?;
    let mut shape = Shape::new(INPUT_CHANNELS, input.agents(), input.items());
    let mut shapes = vec![shape];
    let mut acts = vec![input.data().iter().map(|&x| T::from(x).unwrap()).collect::<Vec<T>>()];
    for (spec, w, b) in &layout.slots {
        let mut out = spec.forward(&weights[w.clone()], &weights[b.clone()], acts.last().unwrap(), shape);
        if spec.kind != LayerKind::Project {
            out.iter_mut().for_each(|x| *x = x.tanh());
        }
        shape = spec.output_shape(shape);
        shapes.push(shape);
        acts.push(out);
    }
    Ok(Trace { shapes, acts })
}

/// Gradient of a scalar objective with respect to all weights, given its
/// gradient with respect to the logits.
pub fn backward<T: Scalar>(layout: &Layout, weights: &[T], trace: &Trace<T>, grad_logits: Vec<T>, grad: &mut [T]) {
    let mut g = grad_logits;
    for (l, (spec, w, b)) in layout.slots.iter().enumerate().rev() {
        if spec.kind != LayerKind::Project {
            for (gi, &y) in g.iter_mut().zip(&trace.acts[l + 1]) {
                *gi = *gi * (T::one() - y * y);
            }
        }
        let (gw, gb) = grad.split_at_mut(b.start);
        g = spec.backward(
            &weights[w.clone()],
            &trace.acts[l],
            trace.shapes[l],
            &g,
            &mut gw[w.clone()],
            &mut gb[..spec.out_channels],
            l > 0,
        );
    }
}

/// Column-wise softmax of `n x m` logits at temperature `t`, max-shifted.
pub fn softmax_columns<T: Scalar>(logits: &[T], n: usize, m: usize, t: T) -> Vec<T> {
    let mut out = vec![T::zero(); n * m];
    for j in 0..m {
        let mut hi = T::neg_infinity();
        for i in 0..n {
            hi = hi.max(logits[i * m + j]);
        }
        let mut z = T::zero();
        for i in 0..n {
            let e = flush(((logits[i * m + j] - hi) / t).exp());
            out[i * m + j] = e;
            z += e;
        }
        for i in 0..n {
            out[i * m + j] = flush(out[i * m + j] / z);
        }
    }
    out
}

/// Adam hyperparameters stored alongside the weights they produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Trained (or freshly initialized) network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub arch: ArchConfig,
    pub lambda: f64,
    pub adam: AdamConfig,
    weights: Vec<f32>,
}

impl NetworkParams {
    pub fn from_weights(arch: ArchConfig, lambda: f64, adam: AdamConfig, weights: Vec<f32>) -> Result<Self> {
        arch.validate()?;
        let expected = Layout::new(&arch).len;
        if weights.len() != expected {
            return Err(Error::CorruptModel(format!(
                "architecture needs {expected} parameters, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::CorruptModel("non-finite weight".into()));
        }
        Ok(Self { arch, lambda, adam, weights })
    }

    pub fn zeros(arch: ArchConfig) -> Self {
        let len = Layout::new(&arch).len;
        Self { arch, lambda: 0.0, adam: AdamConfig::default(), weights: vec![0.0; len] }
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f32] {
        &mut self.weights
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.arch)
    }

    /// Weights widened to `f64`, for high-precision shadow evaluation.
    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|&w| w as f64).collect()
    }

    pub fn logits(&self, input: &InputTensor) -> Result<Vec<f32>> {
        let trace = forward_trace(&self.arch, &self.layout(), &self.weights, input)?;
        Ok(trace.acts.into_iter().last().unwrap())
    }

    /// Per-item distribution over agents.
    pub fn forward(&self, input: &InputTensor) -> Result<FractionalAllocation> {
        let logits: Vec<f64> = self.logits(input)?.into_iter().map(f64::from).collect();
        let (n, m) = (input.agents(), input.items());
        let p = softmax_columns(&logits, n, m, self.arch.temperature);
        FractionalAllocation::new(n, m, p)
    }
}

/// Per-item argmax over agents, lowest agent on ties.
pub fn discretize(frac: &FractionalAllocation) -> Allocation {
    let (n, m) = (frac.agents(), frac.items());
    let assign = (0..m)
        .map(|j| {
            let mut best = 0;
            for i in 1..n {
                if frac.share(i, j) > frac.share(best, j) {
                    best = i;
                }
            }
            best
        })
        .collect();
    Allocation::from_assignment(assign)
}
