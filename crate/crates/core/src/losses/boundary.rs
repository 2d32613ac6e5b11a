//! Differentiable boundary F1 against a binary boundary map.
//!
//! Boundaries are extracted from each probability channel with a max-pool
//! (`theta0`) and merged across channels with a pixelwise max. Precision
//! and recall tolerate misalignment up to `theta / 2` pixels by dilating
//! the opposite map with a second max-pool (`theta`).

use crate::grids::{BoundaryGrid, ProbGrid, RealGrid};

use super::pool::{max_pool, soft_boundary_with_arg};
use super::{check_spatial, LossError, LossResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    /// Odd pooling window used to extract boundaries.
    pub theta0: usize,
    /// Odd pooling window giving the matching tolerance.
    pub theta: usize,
    pub epsilon: f64,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self {
            theta0: 3,
            theta: 5,
            epsilon: 1e-7,
        }
    }
}

impl BoundaryParams {
    pub fn validate(&self) -> Result<(), LossError> {
        for (name, w) in [("theta0", self.theta0), ("theta", self.theta)] {
            if w == 0 || w % 2 == 0 {
                return Err(LossError::InvalidParams(format!(
                    "{name} must be a positive odd window, got {w}"
                )));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(LossError::InvalidParams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Soft boundary `maxpool(1 - y, theta0) - (1 - y)` of a single plane.
pub fn soft_boundary(values: &[f64], height: usize, width: usize, theta0: usize) -> Vec<f64> {
    assert_eq!(values.len(), height * width, "plane size mismatch");
    assert!(theta0 % 2 == 1, "window must be odd");
    soft_boundary_with_arg(values, height, width, theta0).0
}

/// Class-agnostic predicted boundary: channelwise max of per-channel soft
/// boundaries. Returns the map, the winning channel per pixel, and the
/// per-channel pooling arg-max.
fn merged_boundary(probs: &RealGrid, theta0: usize) -> (Vec<f64>, Vec<usize>, Vec<Vec<usize>>) {
    let (h, w, c) = probs.shape();
    let mut merged = vec![f64::NEG_INFINITY; h * w];
    let mut winner = vec![0usize; h * w];
    let mut args = Vec::with_capacity(c);
    for k in 0..c {
        let (b, arg) = soft_boundary_with_arg(&probs.channel_plane(k), h, w, theta0);
        for (i, v) in b.into_iter().enumerate() {
            if v > merged[i] {
                merged[i] = v;
                winner[i] = k;
            }
        }
        args.push(arg);
    }
    (merged, winner, args)
}

/// Predicted boundary map for `probs`.
pub fn predicted_boundary(probs: &ProbGrid, theta0: usize) -> Vec<f64> {
    merged_boundary(probs, theta0).0
}

/// Boundary precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bf1Parts {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

struct Bf1Forward {
    parts: Bf1Parts,
    pred_ext_arg: Vec<usize>,
    gt_ext: Vec<f64>,
    pred_sum: f64,
    gt_sum: f64,
    overlap_p: f64,
}

fn bf1_forward(pred: &[f64], gt: &[f64], h: usize, w: usize, theta: usize, eps: f64) -> Bf1Forward {
    let (pred_ext, pred_ext_arg) = max_pool(pred, h, w, theta);
    let (gt_ext, _) = max_pool(gt, h, w, theta);
    let pred_sum: f64 = pred.iter().sum();
    let gt_sum: f64 = gt.iter().sum();
    let overlap_p: f64 = pred.iter().zip(&gt_ext).map(|(a, b)| a * b).sum();
    let overlap_r: f64 = pred_ext.iter().zip(gt).map(|(a, b)| a * b).sum();
    let precision = overlap_p / (pred_sum + eps);
    let recall = overlap_r / (gt_sum + eps);
    let f1 = 2.0 * precision * recall / (precision + recall + eps);
    Bf1Forward {
        parts: Bf1Parts { precision, recall, f1 },
        pred_ext_arg,
        gt_ext,
        pred_sum,
        gt_sum,
        overlap_p,
    }
}

/// Boundary F1 between a predicted boundary map and a ground-truth map,
/// both with values in `[0, 1]`.
pub fn boundary_f1(pred: &[f64], gt: &[f64], height: usize, width: usize, theta: usize, epsilon: f64) -> Bf1Parts {
    assert_eq!(pred.len(), height * width);
    assert_eq!(gt.len(), height * width);
    assert!(theta % 2 == 1, "window must be odd");
    bf1_forward(pred, gt, height, width, theta, epsilon).parts
}

/// `1 - BF1` between the boundary predicted from `probs` and `sgb`.
pub fn boundary_loss(probs: &ProbGrid, sgb: &BoundaryGrid, params: &BoundaryParams) -> Result<LossResult, LossError> {
    Ok(boundary_loss_detailed(probs, sgb, params)?.0)
}

/// [`boundary_loss`] together with the precision/recall breakdown.
pub fn boundary_loss_detailed(
    probs: &ProbGrid,
    sgb: &BoundaryGrid,
    params: &BoundaryParams,
) -> Result<(LossResult, Bf1Parts), LossError> {
    params.validate()?;
    check_spatial(probs, sgb.height(), sgb.width())?;
    let (h, w, c) = probs.shape();
    let eps = params.epsilon;
    let gt = sgb.to_unit();

    let (pred, winner, args) = merged_boundary(probs, params.theta0);
    let fwd = bf1_forward(&pred, &gt, h, w, params.theta, eps);
    let Bf1Parts {
        precision: p,
        recall: r,
        f1,
    } = fwd.parts;
    let raw = 1.0 - f1;
    let value = raw.clamp(0.0, 1.0);

    let mut grad = RealGrid::zeros(h, w, c);
    if raw != value {
        return Ok((LossResult { value, grad }, fwd.parts));
    }

    // d(1 - BF1)/dp and d(1 - BF1)/dr
    let denom = p + r + eps;
    let dl_dp = -2.0 * r * (r + eps) / (denom * denom);
    let dl_dr = -2.0 * p * (p + eps) / (denom * denom);

    // precision = overlap_p / (pred_sum + eps); recall = overlap_r / (gt_sum + eps)
    let inv_pred = 1.0 / (fwd.pred_sum + eps);
    let inv_gt = 1.0 / (fwd.gt_sum + eps);
    let mut g_pred: Vec<f64> = fwd
        .gt_ext
        .iter()
        .map(|&ge| dl_dp * (ge * inv_pred - fwd.overlap_p * inv_pred * inv_pred))
        .collect();
    for (q, &gq) in gt.iter().enumerate() {
        if gq != 0.0 {
            g_pred[fwd.pred_ext_arg[q]] += dl_dr * gq * inv_gt;
        }
    }

    // b_k = maxpool(1 - y_k) - (1 - y_k): d b_k[q] / d y_k[q] = 1 and
    // d b_k[q] / d y_k[arg(q)] = -1
    let gd = grad.data_mut();
    for (q, &g) in g_pred.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let k = winner[q];
        gd[q * c + k] += g;
        gd[args[k][q] * c + k] -= g;
    }
    Ok((LossResult { value, grad }, fwd.parts))
}
