//! Seeded synthetic segmentation scenes.
//!
//! A scene is a background of class 0 with random rectangles and ellipses of
//! the other classes painted over it. Each class has a fixed colour and the
//! image adds Gaussian noise, quantised to 8 bits. The mask archive holds the
//! 4-connected components of the label map, so the derived SGO/SGB agree
//! with the ground truth unless `corruption` merges or splits masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Sample, TrainConfig};
use crate::grids::{LabelGrid, RealGrid};
use crate::mask_prep::{generate_sgo_sgb, MaskArchive, PrepParams, RleMask};

pub const PALETTE: [[f64; 3]; 8] = [
    [0.30, 0.55, 0.30],
    [0.65, 0.60, 0.45],
    [0.35, 0.40, 0.70],
    [0.75, 0.35, 0.35],
    [0.55, 0.55, 0.55],
    [0.80, 0.75, 0.30],
    [0.25, 0.65, 0.70],
    [0.60, 0.35, 0.65],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub shapes: usize,
    /// Standard deviation of the per-channel colour noise.
    pub noise: f64,
    /// Probability that a mask is split in two or merged with another.
    pub corruption: f64,
    pub prep: PrepParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            classes: 3,
            shapes: 6,
            noise: 0.45,
            corruption: 0.0,
            prep: PrepParams::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.height < 4 || self.width < 4 {
            return Err(format!("scene {}x{} is too small", self.height, self.width));
        }
        if !(2..=PALETTE.len()).contains(&self.classes) {
            return Err(format!(
                "classes must be in 2..={}, got {}",
                PALETTE.len(),
                self.classes
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(format!("noise must be non-negative, got {}", self.noise));
        }
        if !(0.0..=1.0).contains(&self.corruption) {
            return Err(format!("corruption must be in [0, 1], got {}", self.corruption));
        }
        Ok(())
    }
}

fn paint_labels<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> Vec<u16> {
    let (h, w) = (cfg.height, cfg.width);
    let mut labels = vec![0u16; h * w];
    let max_half = (h.min(w) / 4).max(2);
    for _ in 0..cfg.shapes {
        let class = rng.random_range(1..cfg.classes) as u16;
        let cy = rng.random_range(0..h) as f64;
        let cx = rng.random_range(0..w) as f64;
        let ry = rng.random_range(2..=max_half) as f64;
        let rx = rng.random_range(2..=max_half) as f64;
        let ellipse = rng.random_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let (dy, dx) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
                let inside = if ellipse {
                    dy * dy + dx * dx <= 1.0
                } else {
                    dy.abs() <= 1.0 && dx.abs() <= 1.0
                };
                if inside {
                    labels[y * w + x] = class;
                }
            }
        }
    }
    labels
}

/// 4-connected components of equal label, in raster order of their first
/// pixel.
pub fn label_components(labels: &[u16], height: usize, width: usize) -> Vec<Vec<bool>> {
    let mut seen = vec![false; labels.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if seen[start] {
            continue;
        }
        let mut mask = vec![false; labels.len()];
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            mask[i] = true;
            let (y, x) = (i / width, i % width);
            let mut visit = |j: usize| {
                if !seen[j] && labels[j] == labels[start] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
        }
        out.push(mask);
    }
    out
}

fn corrupt<R: Rng>(masks: Vec<Vec<bool>>, width: usize, p: f64, rng: &mut R) -> Vec<Vec<bool>> {
    if p == 0.0 {
        return masks;
    }
    let mut out: Vec<Vec<bool>> = Vec::new();
    for mask in masks {
        if !rng.random_bool(p) {
            out.push(mask);
            continue;
        }
        if rng.random_bool(0.5) || out.is_empty() {
            // split at the middle column of the bounding box
            let cols: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).map(|i| i % width).collect();
            let mid = (cols.iter().min().unwrap() + cols.iter().max().unwrap()).div_ceil(2);
            let left: Vec<bool> = mask.iter().enumerate().map(|(i, &m)| m && i % width < mid).collect();
            let right: Vec<bool> = mask.iter().enumerate().map(|(i, &m)| m && i % width >= mid).collect();
            out.extend([left, right].into_iter().filter(|m| m.iter().any(|&v| v)));
        } else {
            let j = rng.random_range(0..out.len());
            for (a, b) in out[j].iter_mut().zip(&mask) {
                *a |= *b;
            }
        }
    }
    out
}

/// One scene with its mask archive.
pub fn synth_sample<R: Rng>(cfg: &SynthConfig, name: &str, rng: &mut R) -> Result<(Sample, MaskArchive), crate::Error> {
    cfg.validate().map_err(crate::model::train::TrainError::InvalidConfig)?;
    let (h, w) = (cfg.height, cfg.width);
    let labels = paint_labels(cfg, rng);
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("valid noise");
    let mut image = Vec::with_capacity(h * w * 3);
    for &l in &labels {
        for &base in &PALETTE[l as usize] {
            let v = if cfg.noise > 0.0 {
                base + noise.sample(rng)
            } else {
                base
            };
            image.push((v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
        }
    }
    let masks = corrupt(label_components(&labels, h, w), w, cfg.corruption, rng);
    let archive = MaskArchive {
        height: h,
        width: w,
        segmenter: None,
        masks: masks.iter().map(|m| RleMask::from_bitmap(m)).collect(),
    };
    let (sgo, sgb) = generate_sgo_sgb(&archive, &cfg.prep)?;
    let sample = Sample {
        name: name.to_string(),
        image: RealGrid::new(h, w, 3, image)?,
        labels: LabelGrid::new(h, w, labels)?,
        sgo,
        sgb,
    };
    Ok((sample, archive))
}

/// `count` scenes named `000`, `001`, ... from one seeded generator.
pub fn synth_dataset(
    cfg: &SynthConfig,
    count: usize,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<MaskArchive>), crate::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    let mut archives = Vec::with_capacity(count);
    for i in 0..count {
        let (s, a) = synth_sample(cfg, &format!("{i:03}"), &mut rng)?;
        samples.push(s);
        archives.push(a);
    }
    Ok((samples, archives))
}

/// Desk-scale training benchmark: 8 training and 4 held-out scenes of
/// 64x64 with 3 classes, 32-pixel windows and a 200-step budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub config: TrainConfig,
    pub included: Vec<usize>,
}

impl Benchmark {
    pub const TRAIN_SCENES: usize = 8;
    pub const TEST_SCENES: usize = 4;
    pub const STEPS: usize = 200;

    /// Scenes and training seed both derive from `seed`.
    pub fn new(seed: u64) -> Result<Self, crate::Error> {
        let scenes = SynthConfig::default();
        let (train, _) = synth_dataset(&scenes, Self::TRAIN_SCENES, 100 + seed)?;
        let (test, _) = synth_dataset(&scenes, Self::TEST_SCENES, 900 + seed)?;
        let config = TrainConfig {
            classes: scenes.classes,
            hidden_channels: 8,
            layers: 3,
            epochs: 10_000,
            max_steps: Some(Self::STEPS),
            seed,
            window: 32,
            train_stride: 32,
            test_stride: 8,
            ..TrainConfig::default()
        };
        Ok(Self {
            train,
            test,
            config,
            included: (0..scenes.classes).collect(),
        })
    }

    /// Held-out mean IoU of a trained model.
    pub fn mean_iou(&self, model: &crate::ToyFcn) -> Result<f64, crate::Error> {
        let (_, report) = super::evaluate(
            model,
            &self.test,
            self.config.window,
            self.config.test_stride,
            &self.included,
        )?;
        Ok(report.mean_iou)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_consistent() {
        let cfg = SynthConfig::default();
        let (a, arch) = synth_dataset(&cfg, 3, 7).unwrap();
        let (b, _) = synth_dataset(&cfg, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_dataset(&cfg, 3, 8).unwrap().0);
        for (s, m) in a.iter().zip(&arch) {
            m.validate().unwrap();
            // components partition the image
            let covered: usize = m.masks.iter().map(|r| r.area).sum();
            assert_eq!(covered, 64 * 64);
            // every object lies inside one class
            for id in 1..=s.sgo.max_id() {
                let classes: std::collections::BTreeSet<u16> = s
                    .sgo
                    .data()
                    .iter()
                    .zip(s.labels.data())
                    .filter(|(&o, _)| o == id)
                    .map(|(_, &l)| l)
                    .collect();
                assert_eq!(classes.len(), 1);
            }
            assert!(s.image.data().iter().all(|&v| ((v * 255.0).round() / 255.0) == v));
        }
    }

    #[test]
    fn components_of_a_checkerboard_are_single_pixels() {
        let labels: Vec<u16> = (0..9).map(|i| (i % 2) as u16).collect();
        assert_eq!(label_components(&labels, 3, 3).len(), 9);
        assert_eq!(label_components(&[1; 6], 2, 3).len(), 1);
    }

    #[test]
    fn corruption_changes_masks() {
        let cfg = SynthConfig {
            corruption: 1.0,
            ..SynthConfig::default()
        };
        let clean = synth_dataset(&SynthConfig::default(), 2, 3).unwrap().1;
        let dirty = synth_dataset(&cfg, 2, 3).unwrap().1;
        assert_ne!(clean, dirty);
        for a in &dirty {
            a.validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SynthConfig {
            classes: 9,
            ..SynthConfig::default()
        };
        assert!(synth_dataset(&cfg, 1, 0).is_err());
    }
}
