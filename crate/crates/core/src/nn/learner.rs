//! Shallow MLP weak learner with hand-written forward and backward passes.
//!
//! Each hidden layer computes `act(bn(W x + b))`; the output is a single
//! linear unit over the last hidden layer. The last hidden layer's activations
//! are the learner's penultimate features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::nn::arch::LearnerArch;
use crate::rng::RngState;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `(out × in)`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn kaiming_uniform(fan_in: usize, fan_out: usize, gain: f64, rng: &mut RngState) -> Self {
        let bound = gain * (3.0 / fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        Dense {
            weights: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
            bias: vec![0.0; fan_out],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub dense: Dense,
    pub norm: Option<BatchNorm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakLearner {
    arch: LearnerArch,
    hidden: Vec<HiddenLayer>,
    output: Dense,
    /// Bumped whenever parameters are handed out for mutation.
    #[serde(skip)]
    version: u64,
}

impl PartialEq for WeakLearner {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.hidden == other.hidden && self.output == other.output
    }
}

/// Scores and penultimate activations for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub scores: Vec<f64>,
    pub penultimate: Matrix,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Matrix,
    /// Normalized pre-activations and per-feature `1/σ`, when batch norm is on.
    normalized: Option<(Matrix, Vec<f64>)>,
    /// Input to the activation function.
    pre_activation: Matrix,
}

/// Intermediate values of a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    layers: Vec<LayerCache>,
    penultimate: Matrix,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.penultimate.rows()
    }

    /// Per hidden layer, the values fed to the activation function.
    pub fn pre_activations(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().map(|l| &l.pre_activation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
}

/// Gradients for every trainable parameter, in the same order as
/// [`WeakLearner::params_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<LayerGradients>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl Gradients {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.hidden.len() * 4 + 2);
        for layer in &self.hidden {
            out.push(layer.weights.as_slice());
            out.push(layer.bias.as_slice());
            if let (Some(g), Some(b)) = (&layer.gamma, &layer.beta) {
                out.push(g.as_slice());
                out.push(b.as_slice());
            }
        }
        out.push(self.output_weights.as_slice());
        out.push(std::slice::from_ref(&self.output_bias));
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

impl WeakLearner {
    /// Fresh learner: Kaiming-uniform weights (ReLU gain for hidden layers,
    /// unit gain for the linear output), zero biases, identity batch norm.
    pub fn new(arch: LearnerArch, rng: &mut RngState) -> Result<Self> {
        arch.validate()?;
        let mut fan_in = arch.input_dim;
        let mut hidden = Vec::with_capacity(arch.hidden_dims.len());
        for &width in &arch.hidden_dims {
            hidden.push(HiddenLayer {
                dense: Dense::kaiming_uniform(fan_in, width, std::f64::consts::SQRT_2, rng),
                norm: arch.use_batch_norm.then(|| BatchNorm::new(width)),
            });
            fan_in = width;
        }
        let output = Dense::kaiming_uniform(fan_in, 1, 1.0, rng);
        Ok(Self {
            arch,
            hidden,
            output,
            version: 0,
        })
    }

    pub fn arch(&self) -> &LearnerArch {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn penultimate_dim(&self) -> usize {
        self.arch.penultimate_dim()
    }

    pub fn hidden_layers(&self) -> &[HiddenLayer] {
        &self.hidden
    }

    pub fn hidden_layers_mut(&mut self) -> &mut [HiddenLayer] {
        self.version += 1;
        &mut self.hidden
    }

    pub fn output_layer(&self) -> &Dense {
        &self.output
    }

    pub fn output_layer_mut(&mut self) -> &mut Dense {
        self.version += 1;
        &mut self.output
    }

    /// Rebuild a learner from stored parts, checking shapes against `arch`.
    pub fn from_parts(arch: LearnerArch, hidden: Vec<HiddenLayer>, output: Dense) -> Result<Self> {
        arch.validate()?;
        if hidden.len() != arch.hidden_dims.len() {
            return Err(Error::Shape(format!(
                "{} hidden layers stored, architecture declares {}",
                hidden.len(),
                arch.hidden_dims.len()
            )));
        }
        let mut fan_in = arch.input_dim;
        for (i, (layer, &width)) in hidden.iter().zip(&arch.hidden_dims).enumerate() {
            if layer.dense.weights.shape() != (width, fan_in) || layer.dense.bias.len() != width {
                return Err(Error::Shape(format!("hidden layer {i} does not match {width}x{fan_in}")));
            }
            match (&layer.norm, arch.use_batch_norm) {
                (Some(bn), true) => {
                    let ok = [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var]
                        .iter()
                        .all(|v| v.len() == width);
                    if !ok {
                        return Err(Error::Shape(format!("batch norm of layer {i} has wrong width")));
                    }
                    if bn.running_var.iter().any(|&v| v < 0.0) {
                        return Err(Error::Input(format!("negative running variance in layer {i}")));
                    }
                }
                (None, false) => {}
                _ => {
                    return Err(Error::Shape(format!(
                        "batch norm presence in layer {i} disagrees with architecture"
                    )))
                }
            }
            fan_in = width;
        }
        if output.weights.shape() != (1, fan_in) || output.bias.len() != 1 {
            return Err(Error::Shape(format!("output layer does not match 1x{fan_in}")));
        }
        Ok(Self {
            arch,
            hidden,
            output,
            version: 0,
        })
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.arch.input_dim {
            return Err(Error::Shape(format!(
                "learner expects {} input features, batch has {}",
                self.arch.input_dim,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Inference pass using batch-norm running statistics. Mutates nothing.
    pub fn forward_eval(&self, x: &Matrix) -> Result<Forward> {
        self.check_input(x)?;
        let mut act = x.clone();
        for (l, layer) in self.hidden.iter().enumerate() {
            let mut z = act.affine(&layer.dense.weights, &layer.dense.bias);
            if let Some(bn) = &layer.norm {
                for r in 0..z.rows() {
                    for (c, v) in z.row_mut(r).iter_mut().enumerate() {
                        let inv_std = 1.0 / (bn.running_var[c] + BN_EPSILON).sqrt();
                        *v = bn.gamma[c] * (*v - bn.running_mean[c]) * inv_std + bn.beta[c];
                    }
                }
            }
            let f = self.arch.activation_of(l);
            z.as_mut_slice().iter_mut().for_each(|v| *v = f.apply(*v));
            act = z;
        }
        let scores = self.output_scores(&act);
        Ok(Forward {
            scores,
            penultimate: act,
        })
    }

    /// Training pass: batch norm uses mini-batch statistics (biased variance)
    /// and folds them into the running statistics.
    pub fn forward_train(&mut self, x: &Matrix) -> Result<(Forward, ForwardCache)> {
        self.check_input(x)?;
        if self.arch.use_batch_norm && x.rows() < 2 {
            return Err(Error::DegenerateBatch(x.rows()));
        }
        let n = x.rows() as f64;
        let mut act = x.clone();
        let mut caches = Vec::with_capacity(self.hidden.len());
        for l in 0..self.hidden.len() {
            let f = self.arch.activation_of(l);
            let layer = &mut self.hidden[l];
            let z = act.affine(&layer.dense.weights, &layer.dense.bias);
            let (pre, normalized) = match &mut layer.norm {
                Some(bn) => {
                    let mean: Vec<f64> = z.column_sums().iter().map(|s| s / n).collect();
                    let mut var = vec![0.0; z.cols()];
                    for r in 0..z.rows() {
                        for (c, v) in z.row(r).iter().enumerate() {
                            let d = v - mean[c];
                            var[c] += d * d;
                        }
                    }
                    var.iter_mut().for_each(|v| *v /= n);
                    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
                    let mut x_hat = z;
                    let mut pre = Matrix::zeros(x_hat.rows(), x_hat.cols());
                    for r in 0..x_hat.rows() {
                        for c in 0..x_hat.cols() {
                            let h = (x_hat.get(r, c) - mean[c]) * inv_std[c];
                            x_hat.set(r, c, h);
                            pre.set(r, c, bn.gamma[c] * h + bn.beta[c]);
                        }
                    }
                    for c in 0..mean.len() {
                        bn.running_mean[c] = (1.0 - BN_MOMENTUM) * bn.running_mean[c] + BN_MOMENTUM * mean[c];
                        bn.running_var[c] = (1.0 - BN_MOMENTUM) * bn.running_var[c] + BN_MOMENTUM * var[c];
                    }
                    (pre, Some((x_hat, inv_std)))
                }
                None => (z, None),
            };
            let mut out = pre.clone();
            out.as_mut_slice().iter_mut().for_each(|v| *v = f.apply(*v));
            caches.push(LayerCache {
                input: std::mem::replace(&mut act, out),
                normalized,
                pre_activation: pre,
            });
        }
        let scores = self.output_scores(&act);
        let cache = ForwardCache {
            version: self.version,
            layers: caches,
            penultimate: act.clone(),
        };
        Ok((
            Forward {
                scores,
                penultimate: act,
            },
            cache,
        ))
    }

    fn output_scores(&self, penultimate: &Matrix) -> Vec<f64> {
        let w = self.output.weights.row(0);
        let b = self.output.bias[0];
        (0..penultimate.rows())
            .map(|r| b + dot(penultimate.row(r), w))
            .collect()
    }

    /// Backpropagate `d_scores` (and optionally a gradient on the penultimate
    /// features) through a cached train-mode pass.
    ///
    /// Returns parameter gradients and the gradient with respect to the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_scores: &[f64],
        d_penultimate: Option<&Matrix>,
    ) -> Result<(Gradients, Matrix)> {
        if cache.version != self.version {
            return Err(Error::Contract(
                "forward cache is stale: parameters changed after the forward pass".into(),
            ));
        }
        let rows = cache.batch_size();
        if d_scores.len() != rows {
            return Err(Error::Shape(format!(
                "upstream gradient has {} entries for a batch of {rows}",
                d_scores.len()
            )));
        }
        if let Some(dp) = d_penultimate {
            if dp.shape() != cache.penultimate.shape() {
                return Err(Error::Shape("penultimate gradient shape mismatch".into()));
            }
        }

        let w_out = self.output.weights.row(0);
        let mut output_weights = vec![0.0; w_out.len()];
        for (r, &g) in d_scores.iter().enumerate() {
            for (acc, a) in output_weights.iter_mut().zip(cache.penultimate.row(r)) {
                *acc += g * a;
            }
        }
        let output_bias = d_scores.iter().sum();

        // gradient w.r.t. the last hidden activations
        let mut d_act = Matrix::zeros(rows, w_out.len());
        for (r, &g) in d_scores.iter().enumerate() {
            for (d, w) in d_act.row_mut(r).iter_mut().zip(w_out) {
                *d = g * w;
            }
        }
        if let Some(dp) = d_penultimate {
            for (d, p) in d_act.as_mut_slice().iter_mut().zip(dp.as_slice()) {
                *d += p;
            }
        }

        let mut hidden = Vec::with_capacity(self.hidden.len());
        for l in (0..self.hidden.len()).rev() {
            let f = self.arch.activation_of(l);
            let layer = &self.hidden[l];
            let lc = &cache.layers[l];
            let mut d_pre = d_act;
            for (d, &u) in d_pre.as_mut_slice().iter_mut().zip(lc.pre_activation.as_slice()) {
                *d *= f.derivative(u);
            }
            let (d_z, gamma, beta) = match (&layer.norm, &lc.normalized) {
                (Some(bn), Some((x_hat, inv_std))) => {
                    let n = rows as f64;
                    let d_beta = d_pre.column_sums();
                    let mut d_gamma = vec![0.0; d_beta.len()];
                    for r in 0..rows {
                        for (c, acc) in d_gamma.iter_mut().enumerate() {
                            *acc += d_pre.get(r, c) * x_hat.get(r, c);
                        }
                    }
                    let mut d_z = Matrix::zeros(rows, d_beta.len());
                    for r in 0..rows {
                        for c in 0..d_beta.len() {
                            let v = bn.gamma[c]
                                * inv_std[c]
                                * (d_pre.get(r, c) - d_beta[c] / n - x_hat.get(r, c) * d_gamma[c] / n);
                            d_z.set(r, c, v);
                        }
                    }
                    (d_z, Some(d_gamma), Some(d_beta))
                }
                _ => (d_pre, None, None),
            };
            let weights = d_z.t_matmul(&lc.input);
            let bias = d_z.column_sums();
            d_act = d_z.matmul(&layer.dense.weights);
            hidden.push(LayerGradients {
                weights,
                bias,
                gamma,
                beta,
            });
        }
        hidden.reverse();
        Ok((
            Gradients {
                hidden,
                output_weights,
                output_bias,
            },
            d_act,
        ))
    }

    /// Mutable views of every trainable parameter, ordered like
    /// [`Gradients::slices`]. Invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out = Vec::with_capacity(self.hidden.len() * 4 + 2);
        for layer in &mut self.hidden {
            out.push(layer.dense.weights.as_mut_slice());
            out.push(layer.dense.bias.as_mut_slice());
            if let Some(bn) = &mut layer.norm {
                out.push(bn.gamma.as_mut_slice());
                out.push(bn.beta.as_mut_slice());
            }
        }
        out.push(self.output.weights.as_mut_slice());
        out.push(self.output.bias.as_mut_slice());
        out
    }

    /// Flat copy of all trainable parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.hidden {
            out.extend_from_slice(layer.dense.weights.as_slice());
            out.extend_from_slice(&layer.dense.bias);
            if let Some(bn) = &layer.norm {
                out.extend_from_slice(&bn.gamma);
                out.extend_from_slice(&bn.beta);
            }
        }
        out.extend_from_slice(self.output.weights.as_slice());
        out.extend_from_slice(&self.output.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().len()
    }
}
