use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{backward, sgd_step, OptimParams, OptimState, Sample, ToyFcn};
use crate::grids::{ProbGrid, RealGrid};
use crate::losses::{total_loss, BoundaryParams, LossWeights};
use crate::metrics::{ConfusionMatrix, MetricsReport};
use crate::tiling::{augment, sliding_predict, tile_positions, Dihedral};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("sample {name} has {actual} image channels, expected {expected}")]
    ChannelMismatch {
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite loss at step {step}: seg={seg} obj={obj} bdy={bdy}")]
    NonFiniteLoss { step: usize, seg: f64, obj: f64, bdy: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub classes: usize,
    pub hidden_channels: usize,
    pub layers: usize,
    pub weights: LossWeights,
    pub boundary: BoundaryParams,
    pub optim: OptimParams,
    pub epochs: usize,
    /// Stops after this many steps even if epochs remain.
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub window: usize,
    pub train_stride: usize,
    pub test_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            classes: 6,
            hidden_channels: 8,
            layers: 3,
            weights: LossWeights::default(),
            boundary: BoundaryParams::default(),
            optim: OptimParams::default(),
            epochs: 1,
            max_steps: None,
            seed: 0,
            window: 256,
            train_stride: 256,
            test_stride: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), crate::Error> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg).into());
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.layers == 0 || (self.layers > 1 && self.hidden_channels == 0) {
            return bad("network needs at least one layer and nonzero hidden width".into());
        }
        if self.epochs == 0 || self.max_steps == Some(0) {
            return bad("epochs and max_steps must be positive".into());
        }
        if self.window == 0 || self.train_stride == 0 || self.test_stride == 0 {
            return bad("window and strides must be positive".into());
        }
        if !(self.weights.lambda_o >= 0.0 && self.weights.lambda_b >= 0.0) {
            return bad(format!("loss weights must be non-negative, got {:?}", self.weights));
        }
        self.boundary.validate()?;
        self.optim.validate().map_err(TrainError::InvalidConfig)?;
        Ok(())
    }
}

/// Batch-mean loss terms of one optimisation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub seg: f64,
    pub obj: f64,
    pub bdy: f64,
    pub total: f64,
}

impl TraceRow {
    pub const HEADER: &'static str = "step,l_seg,l_obj,l_bdy,l_total";

    pub fn to_line(&self) -> String {
        format!("{},{},{},{},{}", self.step, self.seg, self.obj, self.bdy, self.total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: ToyFcn,
    pub trace: Vec<TraceRow>,
}

impl TrainOutput {
    pub fn trace_text(&self) -> String {
        let mut out = String::from(TraceRow::HEADER);
        out.push('\n');
        for row in &self.trace {
            out.push_str(&row.to_line());
            out.push('\n');
        }
        out
    }
}

/// Trains a freshly initialised network on square tiles cut from `dataset`.
///
/// Each epoch shuffles all tile positions, splits them into consecutive
/// batches and applies one random dihedral transform per tile. The step
/// gradient is the mean of the per-tile gradients.
pub fn train(config: &TrainConfig, dataset: &[Sample]) -> Result<TrainOutput, crate::Error> {
    config.validate()?;
    let first = dataset.first().ok_or(TrainError::EmptyDataset)?;
    let in_channels = first.image.channels();
    let mut positions = Vec::new();
    for (i, s) in dataset.iter().enumerate() {
        s.check()?;
        if s.image.channels() != in_channels {
            return Err(TrainError::ChannelMismatch {
                name: s.name.clone(),
                expected: in_channels,
                actual: s.image.channels(),
            }
            .into());
        }
        let spec = tile_positions(s.image.height(), s.image.width(), config.window, config.train_stride)?;
        positions.extend(spec.positions.into_iter().map(|(r, c)| (i, r, c)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layers = ToyFcn::architecture(in_channels, config.hidden_channels, config.classes, config.layers);
    let mut model = ToyFcn::init(layers, &mut rng)?;
    let mut opt = OptimState::new(config.optim, &model)?;
    let mut trace = Vec::new();
    let budget = config.max_steps.unwrap_or(usize::MAX);

    'epochs: for _ in 0..config.epochs {
        positions.shuffle(&mut rng);
        for batch in positions.chunks(config.optim.batch_size) {
            if trace.len() >= budget {
                break 'epochs;
            }
            let ops: Vec<Dihedral> = batch.iter().map(|_| Dihedral::ALL[rng.random_range(0..8)]).collect();
            let mut grads = vec![0.0; model.params().len()];
            let mut sums = [0.0f64; 4];
            for (&(i, r, c), &op) in batch.iter().zip(&ops) {
                let tile = augment(&dataset[i].tile(r, c, config.window)?, op)?;
                let fwd = model.forward(&tile.image)?;
                let loss = total_loss(
                    fwd.probs(),
                    &tile.labels,
                    &tile.sgo,
                    &tile.sgb,
                    config.weights,
                    &config.boundary,
                )?;
                let g = backward(&model, &fwd, &loss.total.grad)?;
                for (acc, v) in grads.iter_mut().zip(g) {
                    *acc += v;
                }
                for (acc, v) in sums.iter_mut().zip([loss.seg, loss.obj, loss.bdy, loss.total.value]) {
                    *acc += v;
                }
            }
            let n = batch.len() as f64;
            let row = TraceRow {
                step: trace.len() + 1,
                seg: sums[0] / n,
                obj: sums[1] / n,
                bdy: sums[2] / n,
                total: sums[3] / n,
            };
            if !row.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::NonFiniteLoss {
                    step: row.step,
                    seg: row.seg,
                    obj: row.obj,
                    bdy: row.bdy,
                }
                .into());
            }
            grads.iter_mut().for_each(|g| *g /= n);
            sgd_step(&mut model, &grads, &mut opt)?;
            trace.push(row);
        }
    }
    Ok(TrainOutput { model, trace })
}

/// Sliding-window prediction over a whole image.
pub fn predict_image(model: &ToyFcn, image: &RealGrid, window: usize, stride: usize) -> Result<ProbGrid, crate::Error> {
    sliding_predict(image, window, stride, |tile| Ok(model.predict(tile)?))
}

/// Predicts every sample with the test stride and scores the arg-max labels
/// against the ground truth over one global confusion matrix.
pub fn evaluate(
    model: &ToyFcn,
    samples: &[Sample],
    window: usize,
    stride: usize,
    included: &[usize],
) -> Result<(ConfusionMatrix, MetricsReport), crate::Error> {
    let mut cm = ConfusionMatrix::new(model.classes());
    for s in samples {
        let probs = predict_image(model, &s.image, window, stride)?;
        cm.accumulate(&probs.argmax(), &s.labels)?;
    }
    let report = cm.mean_scores(included)?;
    Ok((cm, report))
}
