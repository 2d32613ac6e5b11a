//! Object consistency: predictions inside each object are pulled towards
//! the object's (damped) mean prediction.
//!
//! For object `i` with mask `M` of `N` pixels, the masked prediction is
//! compared with its channel sums divided by `N + 1` (also masked). Each
//! object contributes the mean squared difference over all `H * W * C`
//! elements and the contributions are summed.

use crate::grids::{ObjectGrid, ProbGrid, RealGrid};

use super::{check_spatial, LossError, LossResult};

pub fn object_consistency_loss(probs: &ProbGrid, objects: &ObjectGrid) -> Result<LossResult, LossError> {
    check_spatial(probs, objects.height(), objects.width())?;
    let c = probs.channels();
    let count = objects.max_id() as usize + 1;
    let elements = (probs.pixels() * c) as f64;

    let mut sizes = vec![0usize; count];
    let mut sums = vec![0.0; count * c];
    for (pixel, &id) in objects.data().iter().enumerate() {
        if id == 0 {
            continue;
        }
        let id = id as usize;
        sizes[id] += 1;
        for (s, p) in sums[id * c..(id + 1) * c].iter_mut().zip(probs.pixel_at(pixel)) {
            *s += p;
        }
    }
    let means: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(k, s)| s / (sizes[k / c] as f64 + 1.0))
        .collect();

    // squared residuals per object and residual sums per object/channel
    let mut sq = vec![0.0; count];
    let mut res_sums = vec![0.0; count * c];
    for (pixel, &id) in objects.data().iter().enumerate() {
        if id == 0 {
            continue;
        }
        let id = id as usize;
        for (k, p) in probs.pixel_at(pixel).iter().enumerate() {
            let r = p - means[id * c + k];
            sq[id] += r * r;
            res_sums[id * c + k] += r;
        }
    }
    let value = sq.iter().skip(1).map(|s| s / elements).sum();

    let mut grad = RealGrid::zeros(probs.height(), probs.width(), c);
    let scale = 2.0 / elements;
    for (pixel, &id) in objects.data().iter().enumerate() {
        if id == 0 {
            continue;
        }
        let id = id as usize;
        let damp = 1.0 / (sizes[id] as f64 + 1.0);
        let base = pixel * c;
        for k in 0..c {
            let r = probs.data()[base + k] - means[id * c + k];
            grad.data_mut()[base + k] = scale * (r - damp * res_sums[id * c + k]);
        }
    }
    Ok(LossResult { value, grad })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(h: usize, w: usize, c: usize, v: Vec<f64>) -> ProbGrid {
        ProbGrid::new_unchecked(RealGrid::new(h, w, c, v).unwrap())
    }

    #[test]
    fn two_by_two_hand_value() {
        let p = probs(2, 2, 1, vec![0.0, 0.0, 1.0, 1.0]);
        let sgo = ObjectGrid::new(2, 2, vec![1; 4]).unwrap();
        let r = object_consistency_loss(&p, &sgo).unwrap();
        assert!((r.value - 0.26).abs() < 1e-15);
    }

    #[test]
    fn constant_object_keeps_damping_bias() {
        // four pixels at 1.0: mean 4/5, residual 0.2 on each masked element
        let p = probs(2, 3, 2, vec![1.0; 12]);
        let sgo = ObjectGrid::new(2, 3, vec![1, 1, 0, 1, 1, 0]).unwrap();
        let r = object_consistency_loss(&p, &sgo).unwrap();
        let expected = 8.0 * 0.2f64.powi(2) / 12.0;
        assert!((r.value - expected).abs() < 1e-15);
    }

    #[test]
    fn no_objects_gives_zero() {
        let p = ProbGrid::uniform(3, 3, 3);
        let r = object_consistency_loss(&p, &ObjectGrid::zeros(3, 3)).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn background_pixels_do_not_matter() {
        let sgo = ObjectGrid::new(1, 4, vec![1, 1, 0, 0]).unwrap();
        let a = probs(1, 4, 1, vec![0.2, 0.6, 0.1, 0.9]);
        let b = probs(1, 4, 1, vec![0.2, 0.6, 0.7, 0.3]);
        let ra = object_consistency_loss(&a, &sgo).unwrap();
        let rb = object_consistency_loss(&b, &sgo).unwrap();
        assert_eq!(ra.value, rb.value);
        assert_eq!(ra.grad.data()[2..], [0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch() {
        let p = ProbGrid::uniform(2, 2, 2);
        assert!(object_consistency_loss(&p, &ObjectGrid::zeros(2, 3)).is_err());
    }
}
