use crate::grids::{LabelGrid, ProbGrid, RealGrid};

use super::{check_spatial, LossError, LossResult};

/// Lower clamp on probabilities inside the logarithm.
pub const EPSILON_LOG: f64 = 1e-12;

/// Pixel-averaged cross-entropy against ground-truth labels.
///
/// Ignore-marked pixels contribute neither to the value nor to the
/// normalisation.
pub fn seg_loss(probs: &ProbGrid, labels: &LabelGrid) -> Result<LossResult, LossError> {
    check_spatial(probs, labels.height(), labels.width())?;
    let classes = probs.channels();
    if let Err((index, value)) = labels.check_classes(classes) {
        return Err(LossError::LabelOutOfRange { index, value, classes });
    }
    let valid = labels.data().iter().filter(|&&v| !labels.is_ignored(v)).count();
    if valid == 0 {
        return Err(LossError::NoValidPixels);
    }
    let norm = 1.0 / valid as f64;

    let mut grad = RealGrid::zeros(probs.height(), probs.width(), classes);
    let mut sum = 0.0;
    for (pixel, &label) in labels.data().iter().enumerate() {
        if labels.is_ignored(label) {
            continue;
        }
        let i = pixel * classes + label as usize;
        let p = probs.data()[i];
        if p > EPSILON_LOG {
            sum -= p.ln();
            grad.data_mut()[i] = -norm / p;
        } else {
            sum -= EPSILON_LOG.ln();
        }
    }
    Ok(LossResult {
        value: sum * norm,
        grad,
    })
}
