//! Gating network: `N -> N/2 -> N/4 -> N/8 -> L+1`.
//!
//! Each hidden layer is dense, then batch norm, then ReLU. The head is dense
//! followed by a sigmoid, so every emitted gate lies strictly inside `(0, 1)`.
//! All tensors are `f64`; weights are stored `fan_in x fan_out` and a batch
//! is an `M x width` matrix with one example per row.

mod adam;

pub use adam::{adam_step, AdamState};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Weight on the previous running statistic.
pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

const SIGMOID_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn xavier(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..=limit));
        Self {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, input: ArrayView2<f64>) -> Array2<f64> {
        input.dot(&self.weight) + &self.bias
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub dense: Dense,
    pub norm: BatchNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Running statistics; parameters untouched.
    Infer,
}

/// Trainable tensors plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    widths: Vec<usize>,
    pub hidden: Vec<HiddenLayer>,
    pub output: Dense,
    /// Bumped by every optimizer step; caches from older generations are stale.
    generation: u64,
}

/// Layer widths for an input of `n` samples and `bands` gates.
pub fn layer_widths(n: usize, bands: usize) -> Vec<usize> {
    vec![n, n / 2, n / 4, n / 8, bands]
}

/// Xavier-uniform initialization of the standard three-hidden-layer network.
pub fn init_network(n: usize, l_plus_1: usize, seed: u64) -> Result<NetworkParams> {
    if n < 8 {
        return Err(Error::invalid(format!(
            "input width {n} is too small: three halvings need at least 8 samples"
        )));
    }
    NetworkParams::with_widths(&layer_widths(n, l_plus_1), seed)
}

impl NetworkParams {
    /// Arbitrary depth: `widths = [input, hidden…, output]`.
    pub fn with_widths(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid(format!("invalid layer widths {widths:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = widths.len() - 1;
        let hidden = widths[..last]
            .windows(2)
            .map(|w| HiddenLayer {
                dense: Dense::xavier(w[0], w[1], &mut rng),
                norm: BatchNorm::new(w[1]),
            })
            .collect();
        let output = Dense::xavier(widths[last - 1], widths[last], &mut rng);
        Ok(Self {
            widths: widths.to_vec(),
            hidden,
            output,
            generation: 0,
        })
    }

    /// Assembles parameters loaded from storage, checking shapes.
    pub fn from_parts(hidden: Vec<HiddenLayer>, output: Dense) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        let mut prev = hidden.first().map_or(output.fan_in(), |h| h.dense.fan_in());
        widths.push(prev);
        for (i, layer) in hidden.iter().enumerate() {
            let width = layer.dense.fan_out();
            let norm = &layer.norm;
            if layer.dense.fan_in() != prev
                || layer.dense.bias.len() != width
                || [&norm.gamma, &norm.beta, &norm.running_mean, &norm.running_var]
                    .iter()
                    .any(|t| t.len() != width)
            {
                return Err(Error::invalid(format!("hidden layer {i} has inconsistent shapes")));
            }
            if norm.running_var.iter().any(|&v| v.is_nan() || v <= 0.0) {
                return Err(Error::invalid(format!("hidden layer {i} has non-positive running variance")));
            }
            widths.push(width);
            prev = width;
        }
        if output.fan_in() != prev || output.bias.len() != output.fan_out() {
            return Err(Error::invalid("output layer has inconsistent shapes"));
        }
        widths.push(output.fan_out());
        if widths.contains(&0) {
            return Err(Error::invalid(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self {
            widths,
            hidden,
            output,
            generation: 0,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("non-empty widths")
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub(crate) fn bump_generation(&mut self) {
        self.generation += 1;
    }

    pub fn num_trainable(&self) -> usize {
        self.trainables().iter().map(|(_, t)| t.len()).sum()
    }

    /// Trainable tensors in a fixed order, with their names.
    pub fn trainables(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for (i, layer) in self.hidden.iter().enumerate() {
            out.push((format!("hidden{i}.weight"), slice(&layer.dense.weight)));
            out.push((format!("hidden{i}.bias"), slice(&layer.dense.bias)));
            out.push((format!("hidden{i}.gamma"), slice(&layer.norm.gamma)));
            out.push((format!("hidden{i}.beta"), slice(&layer.norm.beta)));
        }
        out.push(("output.weight".into(), slice(&self.output.weight)));
        out.push(("output.bias".into(), slice(&self.output.bias)));
        out
    }

    /// Mutable view of [`Self::trainables`], same order.
    pub fn trainables_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for (i, layer) in self.hidden.iter_mut().enumerate() {
            out.push((format!("hidden{i}.weight"), slice_mut(&mut layer.dense.weight)));
            out.push((format!("hidden{i}.bias"), slice_mut(&mut layer.dense.bias)));
            out.push((format!("hidden{i}.gamma"), slice_mut(&mut layer.norm.gamma)));
            out.push((format!("hidden{i}.beta"), slice_mut(&mut layer.norm.beta)));
        }
        out.push(("output.weight".into(), slice_mut(&mut self.output.weight)));
        out.push(("output.bias".into(), slice_mut(&mut self.output.bias)));
        out
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_width() {
            return Err(Error::invalid(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_width()
            )));
        }
        if batch.nrows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        Ok(())
    }

    /// Forward pass in either mode. Train mode needs `&mut self` for the
    /// running statistics; see [`Self::forward_train`] and [`Self::infer`].
    pub fn forward(&mut self, batch: ArrayView2<f64>, mode: Mode) -> Result<(Array2<f64>, Option<ForwardCache>)> {
        match mode {
            Mode::Train => self.forward_train(batch).map(|(a, c)| (a, Some(c))),
            Mode::Infer => self.infer(batch).map(|a| (a, None)),
        }
    }

    /// Train-mode forward pass; returns the `M x (L+1)` gates and the cache
    /// needed by [`Self::backward`].
    pub fn forward_train(&mut self, batch: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_batch(&batch)?;
        let m = batch.nrows();
        if m < 2 {
            return Err(Error::invalid(format!("train mode needs at least 2 rows for batch statistics, got {m}")));
        }
        let unbias = m as f64 / (m - 1) as f64;
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut h = batch.to_owned();
        for layer in &mut self.hidden {
            let pre = layer.dense.apply(h.view());
            let mean = pre.mean_axis(Axis(0)).expect("non-empty batch");
            let centred = &pre - &mean;
            let var = centred.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty batch");
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = centred * &inv_std;
            let normed = &xhat * &layer.norm.gamma + &layer.norm.beta;
            let post = normed.mapv(|v| v.max(0.0));

            let norm = &mut layer.norm;
            Zip::from(&mut norm.running_mean)
                .and(&mean)
                .for_each(|r, &b| *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b);
            Zip::from(&mut norm.running_var)
                .and(&var)
                .for_each(|r, &b| *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b * unbias);

            layers.push(LayerCache {
                input: std::mem::replace(&mut h, post),
                xhat,
                inv_std,
                normed,
            });
        }
        let gates = self.output.apply(h.view()).mapv(sigmoid);
        let cache = ForwardCache {
            generation: self.generation,
            layers,
            last_hidden: h,
            gates: gates.clone(),
        };
        Ok((gates, cache))
    }

    /// Inference-mode forward pass using running statistics.
    pub fn infer(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        let mut h = batch.to_owned();
        for layer in &self.hidden {
            let pre = layer.dense.apply(h.view());
            let norm = &layer.norm;
            let scale = Zip::from(&norm.gamma)
                .and(&norm.running_var)
                .map_collect(|&g, &v| g / (v + BN_EPS).sqrt());
            h = ((pre - &norm.running_mean) * &scale + &norm.beta).mapv(|v| v.max(0.0));
        }
        Ok(self.output.apply(h.view()).mapv(sigmoid))
    }

    /// Reverse-mode gradients of a scalar loss given `d loss / d gates`.
    pub fn backward(&self, cache: &ForwardCache, grad_gates: ArrayView2<f64>) -> Result<Gradients> {
        if cache.generation != self.generation || cache.layers.len() != self.hidden.len() {
            return Err(Error::invalid("forward cache does not belong to the current parameters"));
        }
        if grad_gates.dim() != cache.gates.dim() {
            return Err(Error::invalid(format!(
                "upstream gradient has shape {:?}, gates have {:?}",
                grad_gates.dim(),
                cache.gates.dim()
            )));
        }
        let m = cache.gates.nrows() as f64;

        // sigmoid'(z) = a (1 - a)
        let dz = Zip::from(&grad_gates)
            .and(&cache.gates)
            .map_collect(|&g, &a| g * a * (1.0 - a));
        let out_weight = standard(cache.last_hidden.t().dot(&dz));
        let out_bias = dz.sum_axis(Axis(0));
        let mut dh = dz.dot(&self.output.weight.t());

        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (idx, (layer, lc)) in self.hidden.iter().zip(&cache.layers).enumerate().rev() {
            let dy = Zip::from(&dh).and(&lc.normed).map_collect(|&d, &y| if y > 0.0 { d } else { 0.0 });
            let gamma = (&dy * &lc.xhat).sum_axis(Axis(0));
            let beta = dy.sum_axis(Axis(0));
            let dxhat = dy * &layer.norm.gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &lc.xhat).sum_axis(Axis(0));
            let dpre = ((dxhat * m - &sum_dxhat) - &lc.xhat * &sum_dxhat_xhat) * &lc.inv_std.mapv(|s| s / m);
            let weight = standard(lc.input.t().dot(&dpre));
            let bias = dpre.sum_axis(Axis(0));
            if idx > 0 {
                dh = dpre.dot(&layer.dense.weight.t());
            }
            hidden.push(LayerGrads {
                weight,
                bias,
                gamma,
                beta,
            });
        }
        hidden.reverse();
        Ok(Gradients {
            hidden,
            out_weight,
            out_bias,
        })
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    let a = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    a.clamp(f64::MIN_POSITIVE, SIGMOID_MAX)
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn slice<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are kept in standard layout")
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: Array2<f64>,
    /// Normalized pre-activations before the `gamma`/`beta` affine.
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    /// `gamma * xhat + beta`, the ReLU input.
    pub normed: Array2<f64>,
}

/// Intermediate values of a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    pub layers: Vec<LayerCache>,
    pub last_hidden: Array2<f64>,
    pub gates: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Gradients with the shapes of [`NetworkParams`] trainables.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<LayerGrads>,
    pub out_weight: Array2<f64>,
    pub out_bias: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            hidden: params
                .hidden
                .iter()
                .map(|l| LayerGrads {
                    weight: Array2::zeros(l.dense.weight.raw_dim()),
                    bias: Array1::zeros(l.dense.bias.len()),
                    gamma: Array1::zeros(l.norm.gamma.len()),
                    beta: Array1::zeros(l.norm.beta.len()),
                })
                .collect(),
            out_weight: Array2::zeros(params.output.weight.raw_dim()),
            out_bias: Array1::zeros(params.output.bias.len()),
        }
    }

    /// Same order and names as [`NetworkParams::trainables`].
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for (i, g) in self.hidden.iter().enumerate() {
            out.push((format!("hidden{i}.weight"), slice(&g.weight)));
            out.push((format!("hidden{i}.bias"), slice(&g.bias)));
            out.push((format!("hidden{i}.gamma"), slice(&g.gamma)));
            out.push((format!("hidden{i}.beta"), slice(&g.beta)));
        }
        out.push(("output.weight".into(), slice(&self.out_weight)));
        out.push(("output.bias".into(), slice(&self.out_bias)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for (i, g) in self.hidden.iter_mut().enumerate() {
            out.push((format!("hidden{i}.weight"), slice_mut(&mut g.weight)));
            out.push((format!("hidden{i}.bias"), slice_mut(&mut g.bias)));
            out.push((format!("hidden{i}.gamma"), slice_mut(&mut g.gamma)));
            out.push((format!("hidden{i}.beta"), slice_mut(&mut g.beta)));
        }
        out.push(("output.weight".into(), slice_mut(&mut self.out_weight)));
        out.push(("output.bias".into(), slice_mut(&mut self.out_bias)));
        out
    }

    /// Flattened copy, in tensor order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }
}
