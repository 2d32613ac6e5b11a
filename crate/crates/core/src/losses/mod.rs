//! Training losses on post-softmax probabilities, each returning its value
//! and the exact gradient with respect to the probabilities.
//!
//! - [`seg_loss`]: pixel-averaged cross-entropy.
//! - [`object_consistency_loss`]: per-object deviation from the object mean.
//! - [`boundary_loss`]: `1 - BF1` against a boundary map.
//! - [`total_loss`]: `seg + lambda_o * obj + lambda_b * bdy`.

mod boundary;
mod object;
mod pool;
mod seg;

pub use boundary::{
    boundary_f1, boundary_loss, boundary_loss_detailed, predicted_boundary, soft_boundary, Bf1Parts, BoundaryParams,
};
pub use object::object_consistency_loss;
pub use seg::{seg_loss, EPSILON_LOG};

use thiserror::Error;

use crate::grids::{BoundaryGrid, LabelGrid, ObjectGrid, ProbGrid, RealGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("spatial shape {actual:?} does not match predictions {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("label {value} at pixel {index} is not a class in 0..{classes}")]
    LabelOutOfRange { index: usize, value: u16, classes: usize },
    #[error("no labelled pixels: every pixel carries the ignore marker")]
    NoValidPixels,
    #[error("invalid loss parameters: {0}")]
    InvalidParams(String),
}

/// Loss value with `dL/dP` laid out like the probability grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: RealGrid,
}

pub(crate) fn check_spatial(probs: &RealGrid, height: usize, width: usize) -> Result<(), LossError> {
    if (probs.height(), probs.width()) != (height, width) {
        return Err(LossError::ShapeMismatch {
            expected: (probs.height(), probs.width()),
            actual: (height, width),
        });
    }
    Ok(())
}

/// Weights of the auxiliary terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_o: f64,
    pub lambda_b: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_o: 1.0,
            lambda_b: 0.1,
        }
    }
}

/// Composite loss with its individual terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeLoss {
    pub seg: f64,
    pub obj: f64,
    pub bdy: f64,
    pub total: LossResult,
}

pub fn total_loss(
    probs: &ProbGrid,
    labels: &LabelGrid,
    sgo: &ObjectGrid,
    sgb: &BoundaryGrid,
    weights: LossWeights,
    params: &BoundaryParams,
) -> Result<CompositeLoss, LossError> {
    if !(weights.lambda_o >= 0.0 && weights.lambda_b >= 0.0) {
        return Err(LossError::InvalidParams(format!(
            "loss weights must be non-negative, got {weights:?}"
        )));
    }
    let seg = seg_loss(probs, labels)?;
    let obj = object_consistency_loss(probs, sgo)?;
    let bdy = boundary_loss(probs, sgb, params)?;

    let mut grad = seg.grad;
    grad.add_scaled(&obj.grad, weights.lambda_o);
    grad.add_scaled(&bdy.grad, weights.lambda_b);
    let value = seg.value + weights.lambda_o * obj.value + weights.lambda_b * bdy.value;
    Ok(CompositeLoss {
        seg: seg.value,
        obj: obj.value,
        bdy: bdy.value,
        total: LossResult { value, grad },
    })
}
