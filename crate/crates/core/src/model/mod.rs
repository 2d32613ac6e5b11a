//! A small fully-convolutional network with hand-written reverse mode, its
//! SGD trainer and supporting tooling.
//!
//! Every layer is a 3x3 same-padded convolution. Hidden layers are followed
//! by a rectifier, the last layer emits one score per class and a softmax
//! turns scores into probabilities. Inputs are expected in `[0, 1]` and are
//! shifted by [`INPUT_SHIFT`] before the first convolution.

mod checkpoint;
mod dataset;
pub mod gradcheck;
mod optim;
pub mod synth;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};
pub use dataset::{load_dataset, save_dataset, DatasetError, Sample};
pub use optim::{sgd_step, OptimParams, OptimState};
pub use train::{evaluate, predict_image, train, TraceRow, TrainConfig, TrainError, TrainOutput};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::grids::{softmax, GridError, ProbGrid, RealGrid};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;
pub const INPUT_SHIFT: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("tile has {actual} channels but the first layer expects {expected}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid optimiser settings: {0}")]
    InvalidOptim(String),
    #[error("parameter vector has {actual} entries, expected {expected}")]
    ParamCount { expected: usize, actual: usize },
    #[error("forward trace does not belong to this model")]
    TraceMismatch,
    #[error("upstream gradient shape {actual:?} does not match the output {expected:?}")]
    UpstreamShape {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("non-finite model weight at index {0}")]
    NonFiniteWeight(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Channel counts of one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerShape {
    pub fn weight_count(&self) -> usize {
        self.out_channels * TAPS * self.in_channels
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }
}

/// Weights and biases of one layer. Weights are laid out as
/// `[out][ky][kx][in]`.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub shape: LayerShape,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyFcn {
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

impl ToyFcn {
    /// Builds a network from its layer table and flat parameter vector
    /// (per layer: weights, then biases).
    pub fn from_params(layers: Vec<LayerShape>, params: Vec<f64>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::InvalidArchitecture("no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(ModelError::InvalidArchitecture(format!(
                    "layer {i} emits {} channels but layer {} takes {}",
                    pair[0].out_channels,
                    i + 1,
                    pair[1].in_channels
                )));
            }
        }
        if layers.iter().any(|l| l.in_channels == 0 || l.out_channels == 0) {
            return Err(ModelError::InvalidArchitecture("zero-width layer".into()));
        }
        let expected: usize = layers.iter().map(LayerShape::param_count).sum();
        if params.len() != expected {
            return Err(ModelError::ParamCount {
                expected,
                actual: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteWeight(i));
        }
        Ok(Self { layers, params })
    }

    /// Layer table for `depth` convolutions: `in -> hidden -> ... -> classes`.
    pub fn architecture(in_channels: usize, hidden: usize, classes: usize, depth: usize) -> Vec<LayerShape> {
        (0..depth)
            .map(|l| LayerShape {
                in_channels: if l == 0 { in_channels } else { hidden },
                out_channels: if l + 1 == depth { classes } else { hidden },
            })
            .collect()
    }

    pub fn zeros(layers: Vec<LayerShape>) -> Result<Self, ModelError> {
        let n = layers.iter().map(LayerShape::param_count).sum();
        Self::from_params(layers, vec![0.0; n])
    }

    /// He-normal weights, zero biases.
    pub fn init<R: Rng + ?Sized>(layers: Vec<LayerShape>, rng: &mut R) -> Result<Self, ModelError> {
        let mut model = Self::zeros(layers)?;
        let mut offset = 0;
        for shape in model.layers.clone() {
            let std = (2.0 / (TAPS * shape.in_channels) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for w in &mut model.params[offset..offset + shape.weight_count()] {
                *w = normal.sample(rng);
            }
            offset += shape.param_count();
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].in_channels
    }

    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_channels
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let offset: usize = self.layers[..l].iter().map(LayerShape::param_count).sum();
        let shape = self.layers[l];
        let (weights, rest) = self.params[offset..offset + shape.param_count()].split_at(shape.weight_count());
        LayerView {
            shape,
            weights,
            bias: rest,
        }
    }

    pub fn forward(&self, image: &RealGrid) -> Result<Forward, ModelError> {
        if image.channels() != self.in_channels() {
            return Err(ModelError::ChannelMismatch {
                expected: self.in_channels(),
                actual: image.channels(),
            });
        }
        let depth = self.layers.len();
        let mut inputs = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth);
        let mut current = image.clone();
        current.data_mut().iter_mut().for_each(|v| *v -= INPUT_SHIFT);
        for l in 0..depth {
            let z = conv3x3(&current, self.layer(l));
            inputs.push(current);
            current = if l + 1 < depth {
                let mut a = z.clone();
                a.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                a
            } else {
                z.clone()
            };
            pre.push(z);
        }
        let probs = softmax(&current)?;
        Ok(Forward {
            layers: self.layers.clone(),
            inputs,
            pre,
            probs,
        })
    }

    pub fn predict(&self, image: &RealGrid) -> Result<ProbGrid, ModelError> {
        Ok(self.forward(image)?.probs)
    }
}

/// Intermediates retained by [`ToyFcn::forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct Forward {
    layers: Vec<LayerShape>,
    inputs: Vec<RealGrid>,
    pre: Vec<RealGrid>,
    probs: ProbGrid,
}

impl Forward {
    pub fn probs(&self) -> &ProbGrid {
        &self.probs
    }

    pub fn scores(&self) -> &RealGrid {
        &self.pre[self.pre.len() - 1]
    }

    /// Pre-rectifier outputs of every layer; the last entry is the scores.
    pub fn pre_activations(&self) -> &[RealGrid] {
        &self.pre
    }
}

fn conv3x3(input: &RealGrid, layer: LayerView<'_>) -> RealGrid {
    let (h, w, cin) = input.shape();
    let cout = layer.shape.out_channels;
    let mut out = RealGrid::zeros(h, w, cout);
    let data = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            let px = &mut data[(y * w + x) * cout..(y * w + x + 1) * cout];
            px.copy_from_slice(layer.bias);
            for ky in 0..KERNEL {
                let Some(sy) = (y + ky).checked_sub(1).filter(|&s| s < h) else {
                    continue;
                };
                for kx in 0..KERNEL {
                    let Some(sx) = (x + kx).checked_sub(1).filter(|&s| s < w) else {
                        continue;
                    };
                    let inp = input.pixel(sy, sx);
                    for (o, acc) in px.iter_mut().enumerate() {
                        let row = &layer.weights[((o * KERNEL + ky) * KERNEL + kx) * cin..][..cin];
                        *acc += row.iter().zip(inp).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight, bias and input gradients of one convolution.
fn conv3x3_backward(
    input: &RealGrid,
    layer: LayerView<'_>,
    dout: &RealGrid,
    dparams: &mut [f64],
    want_input: bool,
) -> Option<RealGrid> {
    let (h, w, cin) = input.shape();
    let (dw, db) = dparams.split_at_mut(layer.shape.weight_count());
    let mut din = want_input.then(|| RealGrid::zeros(h, w, cin));
    for y in 0..h {
        for x in 0..w {
            let d = dout.pixel(y, x);
            for (acc, &g) in db.iter_mut().zip(d) {
                *acc += g;
            }
            for ky in 0..KERNEL {
                let Some(sy) = (y + ky).checked_sub(1).filter(|&s| s < h) else {
                    continue;
                };
                for kx in 0..KERNEL {
                    let Some(sx) = (x + kx).checked_sub(1).filter(|&s| s < w) else {
                        continue;
                    };
                    let inp = input.pixel(sy, sx);
                    for (o, &g) in d.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        let base = ((o * KERNEL + ky) * KERNEL + kx) * cin;
                        for (acc, &v) in dw[base..base + cin].iter_mut().zip(inp) {
                            *acc += g * v;
                        }
                        if let Some(din) = din.as_mut() {
                            let start = (sy * w + sx) * cin;
                            let row = &layer.weights[base..base + cin];
                            for (acc, &wv) in din.data_mut()[start..start + cin].iter_mut().zip(row) {
                                *acc += g * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    din
}

/// Parameter gradients for `dL/dP`, laid out like [`ToyFcn::params`].
pub fn backward(model: &ToyFcn, trace: &Forward, dl_dp: &RealGrid) -> Result<Vec<f64>, ModelError> {
    if trace.layers != model.layers {
        return Err(ModelError::TraceMismatch);
    }
    let expected = trace.probs.shape();
    if dl_dp.shape() != expected {
        return Err(ModelError::UpstreamShape {
            expected,
            actual: dl_dp.shape(),
        });
    }
    // softmax: ds = p * (g - sum(p * g))
    let c = expected.2;
    let mut delta = RealGrid::zeros(expected.0, expected.1, c);
    for ((d, p), g) in delta
        .data_mut()
        .chunks_exact_mut(c)
        .zip(trace.probs.data().chunks_exact(c))
        .zip(dl_dp.data().chunks_exact(c))
    {
        let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for k in 0..c {
            d[k] = p[k] * (g[k] - dot);
        }
    }

    let mut grads = vec![0.0; model.params.len()];
    let offsets: Vec<usize> = model
        .layers
        .iter()
        .scan(0, |acc, l| {
            let start = *acc;
            *acc += l.param_count();
            Some(start)
        })
        .collect();
    for l in (0..model.layers.len()).rev() {
        let layer = model.layer(l);
        let slot = &mut grads[offsets[l]..offsets[l] + layer.shape.param_count()];
        let din = conv3x3_backward(&trace.inputs[l], layer, &delta, slot, l > 0);
        if let Some(mut din) = din {
            for (g, &z) in din.data_mut().iter_mut().zip(trace.pre[l - 1].data()) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
            delta = din;
        }
    }
    Ok(grads)
}

/// Deterministic He-normal model from a seed.
pub fn seeded_model(layers: Vec<LayerShape>, seed: u64) -> Result<ToyFcn, ModelError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    ToyFcn::init(layers, &mut rng)
}
