//! Small fully connected decoder with LeakyReLU hidden activations.
//!
//! Weights are row-major `out x in`. Besides the per-sample
//! [`mlp_forward`]/[`mlp_backward`] pair, the `*_columns` kernels operate on
//! feature-major batches (`[feature][sample]`) so the inner loops run over
//! contiguous samples.

use rand::Rng;

use crate::error::{Error, Result};
use crate::real::Real;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weight: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[T] {
        &self.weight[j * self.inputs..(j + 1) * self.inputs]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T = f32> {
    pub layers: Vec<Layer<T>>,
    pub leaky_slope: f64,
    /// Apply LeakyReLU to the output layer as well.
    pub output_activation: bool,
}

impl<T: Real> MlpParams<T> {
    /// `dims` lists layer widths from input to output, e.g. `[32, 32, 32, 32, 3]`.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "an MLP needs an input and an output width");
        MlpParams {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            output_activation: false,
        }
    }

    /// Kaiming-uniform weights (LeakyReLU gain) and fan-in-bounded biases.
    pub fn init(dims: &[usize], leaky_slope: f64, rng: &mut impl Rng) -> Self {
        let mut mlp = Self::zeros(dims);
        mlp.leaky_slope = leaky_slope;
        let gain = (2.0 / (1.0 + leaky_slope * leaky_slope)).sqrt();
        for layer in &mut mlp.layers {
            let fan_in = layer.inputs as f64;
            let wb = gain * (3.0 / fan_in).sqrt();
            let bb = 1.0 / fan_in.sqrt();
            layer.weight.iter_mut().for_each(|w| *w = T::lit(rng.gen_range(-wb..wb)));
            layer.bias.iter_mut().for_each(|b| *b = T::lit(rng.gen_range(-bb..bb)));
        }
        mlp
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn activates(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.output_activation
    }

    #[inline]
    fn slope(&self) -> T {
        T::lit(self.leaky_slope)
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U + Copy) -> MlpParams<U> {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weight: l.weight.iter().map(|v| f(*v)).collect(),
                    bias: l.bias.iter().map(|v| f(*v)).collect(),
                })
                .collect(),
            leaky_slope: self.leaky_slope,
            output_activation: self.output_activation,
        }
    }
}

#[inline]
fn leaky<T: Real>(z: T, slope: T) -> T {
    if z > T::zero() {
        z
    } else {
        z * slope
    }
}

/// Derivative of the activation; at exactly zero the negative slope applies.
#[inline]
fn leaky_grad<T: Real>(z: T, slope: T) -> T {
    if z > T::zero() {
        T::one()
    } else {
        slope
    }
}

/// Pre-activations and activations of one forward pass; `activations[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache<T> {
    pub pre_activations: Vec<Vec<T>>,
    pub activations: Vec<Vec<T>>,
}

/// Per-layer gradients congruent with [`MlpParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Real> MlpGrads<T> {
    pub fn zeros_like(mlp: &MlpParams<T>) -> Self {
        MlpGrads {
            layers: mlp.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += *y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += *y);
        }
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|v| *v = T::zero());
            l.bias.iter_mut().for_each(|v| *v = T::zero());
        }
    }
}

pub fn mlp_forward<T: Real>(mlp: &MlpParams<T>, x: &[T]) -> Result<(Vec<T>, MlpCache<T>)> {
    if x.len() != mlp.input_dim() {
        return Err(Error::Argument(format!(
            "decoder expects {} inputs, got {}",
            mlp.input_dim(),
            x.len()
        )));
    }
    let mut cache = MlpCache {
        pre_activations: Vec::with_capacity(mlp.layers.len()),
        activations: vec![x.to_vec()],
    };
    for (k, layer) in mlp.layers.iter().enumerate() {
        let input = cache.activations.last().unwrap();
        let z: Vec<T> = (0..layer.outputs).map(|j| layer.bias[j] + dot(layer.row(j), input)).collect();
        let a = if mlp.activates(k) {
            z.iter().map(|v| leaky(*v, mlp.slope())).collect()
        } else {
            z.clone()
        };
        cache.pre_activations.push(z);
        cache.activations.push(a);
    }
    let y = cache.activations.last().unwrap().clone();
    Ok((y, cache))
}

impl<T: Real> MlpParams<T> {
    /// Allocation-free forward pass; same arithmetic as [`mlp_forward`].
    /// `scratch` needs room for two of the widest layer.
    pub fn eval_into(&self, x: &[T], scratch: &mut [T], y: &mut [T]) {
        let width = self.layers.iter().map(|l| l.outputs.max(l.inputs)).max().unwrap();
        let (a, b) = scratch.split_at_mut(width);
        a[..x.len()].copy_from_slice(x);
        let (mut cur, mut next) = (a, b);
        let slope = self.slope();
        for (k, layer) in self.layers.iter().enumerate() {
            let act = self.activates(k);
            for j in 0..layer.outputs {
                let z = layer.bias[j] + dot(layer.row(j), &cur[..layer.inputs]);
                next[j] = if act { leaky(z, slope) } else { z };
            }
            std::mem::swap(&mut cur, &mut next);
        }
        y.copy_from_slice(&cur[..self.output_dim()]);
    }

    pub fn scratch_len(&self) -> usize {
        2 * self.layers.iter().map(|l| l.outputs.max(l.inputs)).max().unwrap()
    }
}

pub fn mlp_backward<T: Real>(mlp: &MlpParams<T>, cache: &MlpCache<T>, grad_y: &[T]) -> (Vec<T>, MlpGrads<T>) {
    assert_eq!(grad_y.len(), mlp.output_dim());
    let mut grads = MlpGrads::zeros_like(mlp);
    let mut delta = grad_y.to_vec();
    for k in (0..mlp.layers.len()).rev() {
        let layer = &mlp.layers[k];
        if mlp.activates(k) {
            for (d, z) in delta.iter_mut().zip(&cache.pre_activations[k]) {
                *d *= leaky_grad(*z, mlp.slope());
            }
        }
        let input = &cache.activations[k];
        let g = &mut grads.layers[k];
        for j in 0..layer.outputs {
            g.bias[j] = delta[j];
            for (gw, a) in g.weight[j * layer.inputs..(j + 1) * layer.inputs].iter_mut().zip(input) {
                *gw = delta[j] * *a;
            }
        }
        let mut prev = vec![T::zero(); layer.inputs];
        for j in 0..layer.outputs {
            for (p, w) in prev.iter_mut().zip(layer.row(j)) {
                *p += *w * delta[j];
            }
        }
        delta = prev;
    }
    (delta, grads)
}

// ---------------------------------------------------------------------------
// Feature-major batch kernels

#[inline]
pub(crate) fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

/// Dot product with a fixed 8-lane accumulation order.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (xa, xb) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] += xa[l] * xb[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    let s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    s + tail
}

#[inline]
pub(crate) fn sum<T: Real>(a: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        for l in 0..8 {
            acc[l] += a[c * 8 + l];
        }
    }
    let mut tail = T::zero();
    for v in &a[chunks * 8..] {
        tail += *v;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Activations of a feature-major forward pass over `n` samples.
#[derive(Debug, Clone, Default)]
pub struct ColumnCache<T> {
    pub n: usize,
    /// `pre[k]` is `outputs_k x n`.
    pub pre: Vec<Vec<T>>,
    /// `act[k]` is the input of layer `k` (`inputs_k x n`); the last entry is the output.
    pub act: Vec<Vec<T>>,
}

impl<T: Real> MlpParams<T> {
    /// Forward pass over `n` samples. `input` is `inputs_0 x n`; the first layer
    /// may read only a leading block of its inputs from `input` when
    /// `first_bias` supplies the contribution of the remaining inputs (one
    /// value per output, already including the layer bias).
    pub fn forward_columns(&self, input: &[T], n: usize, first_bias: Option<&[T]>, cache: &mut ColumnCache<T>) {
        let layers = self.layers.len();
        cache.n = n;
        cache.pre.resize_with(layers, Vec::new);
        cache.act.resize_with(layers + 1, Vec::new);
        cache.act[0].clear();
        cache.act[0].extend_from_slice(input);
        let first_inputs = input.len() / n;

        for k in 0..layers {
            let layer = &self.layers[k];
            let used_inputs = if k == 0 { first_inputs } else { layer.inputs };
            let (before, after) = cache.act.split_at_mut(k + 1);
            let a_in = &before[k];
            let z = &mut cache.pre[k];
            z.clear();
            z.resize(layer.outputs * n, T::zero());
            for j in 0..layer.outputs {
                let row = &mut z[j * n..(j + 1) * n];
                let b = match (k, first_bias) {
                    (0, Some(fb)) => fb[j],
                    _ => layer.bias[j],
                };
                row.iter_mut().for_each(|v| *v = b);
                let w = layer.row(j);
                for i in 0..used_inputs {
                    axpy(row, w[i], &a_in[i * n..(i + 1) * n]);
                }
            }
            let a_out = &mut after[0];
            a_out.clear();
            if self.activates(k) {
                let slope = self.slope();
                a_out.extend(z.iter().map(|v| leaky(*v, slope)));
            } else {
                a_out.extend_from_slice(z);
            }
        }
    }

    /// Backward pass for a cache from [`forward_columns`](Self::forward_columns).
    ///
    /// `delta` holds `dL/dy` (`outputs x n`) and is consumed as scratch. Weight
    /// gradients for the first `used_inputs` columns of layer 0 and all other
    /// layers accumulate into `grads`. Returns `dL/dz_0` summed over samples
    /// (`outputs_0` values) so callers can form gradients of inputs that were
    /// folded into `first_bias`; `grad_input` receives `dL/d input`
    /// (`used_inputs x n`).
    pub fn backward_columns(
        &self,
        cache: &ColumnCache<T>,
        delta: &mut Vec<T>,
        grads: &mut MlpGrads<T>,
        grad_input: &mut Vec<T>,
    ) -> Vec<T> {
        let n = cache.n;
        let mut scratch: Vec<T> = Vec::new();
        let mut first_delta_sum = Vec::new();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if self.activates(k) {
                let slope = self.slope();
                for (d, z) in delta.iter_mut().zip(&cache.pre[k]) {
                    *d *= leaky_grad(*z, slope);
                }
            }
            let a_in = &cache.act[k];
            let used_inputs = a_in.len() / n;
            let g = &mut grads.layers[k];
            for j in 0..layer.outputs {
                let dj = &delta[j * n..(j + 1) * n];
                g.bias[j] += sum(dj);
                let grow = &mut g.weight[j * layer.inputs..(j + 1) * layer.inputs];
                for i in 0..used_inputs {
                    grow[i] += dot(dj, &a_in[i * n..(i + 1) * n]);
                }
            }
            if k == 0 {
                first_delta_sum = (0..layer.outputs).map(|j| sum(&delta[j * n..(j + 1) * n])).collect();
            }
            let out = if k == 0 { &mut *grad_input } else { &mut scratch };
            out.clear();
            out.resize(used_inputs * n, T::zero());
            for i in 0..used_inputs {
                let row = &mut out[i * n..(i + 1) * n];
                for j in 0..layer.outputs {
                    axpy(row, layer.weight[j * layer.inputs + i], &delta[j * n..(j + 1) * n]);
                }
            }
            if k > 0 {
                std::mem::swap(delta, &mut scratch);
            }
        }
        first_delta_sum
    }
}
