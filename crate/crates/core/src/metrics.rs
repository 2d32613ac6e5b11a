//! Confusion-matrix accumulation and per-class F1 / IoU.
//!
//! Scores are computed from one dataset-wide matrix. A class with all-zero
//! denominators scores 0.

use std::fmt::Write as _;

use thiserror::Error;

use crate::grids::LabelGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("prediction {pred:?} and ground truth {gt:?} differ in shape")]
    ShapeMismatch { pred: (usize, usize), gt: (usize, usize) },
    #[error("class index {value} at pixel {index} is not below {classes}")]
    ClassOutOfRange { index: usize, value: u16, classes: usize },
    #[error("confusion matrices have different class counts ({0} vs {1})")]
    ClassCountMismatch(usize, usize),
    #[error("included class set is empty")]
    EmptyIncluded,
    #[error("included class {0} is not below the class count {1}")]
    IncludedOutOfRange(usize, usize),
}

/// `counts[g * C + p]` is the number of pixels with ground truth `g`
/// predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), classes * classes, "counts must be C x C");
        Self { classes, counts }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one prediction / ground-truth pair. Ground-truth pixels carrying
    /// the ignore marker are skipped.
    pub fn accumulate(&mut self, pred: &LabelGrid, gt: &LabelGrid) -> Result<(), MetricsError> {
        if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
            return Err(MetricsError::ShapeMismatch {
                pred: (pred.height(), pred.width()),
                gt: (gt.height(), gt.width()),
            });
        }
        let c = self.classes;
        let check = |index: usize, value: u16| {
            if value as usize >= c {
                Err(MetricsError::ClassOutOfRange {
                    index,
                    value,
                    classes: c,
                })
            } else {
                Ok(())
            }
        };
        // validate first so a failed call leaves the matrix untouched
        for (i, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
            if gt.is_ignored(g) {
                continue;
            }
            check(i, g)?;
            check(i, p)?;
        }
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            if !gt.is_ignored(g) {
                self.counts[g as usize * c + p as usize] += 1;
            }
        }
        Ok(())
    }

    /// Elementwise sum with another matrix.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if other.classes != self.classes {
            return Err(MetricsError::ClassCountMismatch(self.classes, other.classes));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// True positives, false positives and false negatives of class `c`.
    pub fn tp_fp_fn(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.get(c, c);
        let col: u64 = (0..self.classes).map(|g| self.get(g, c)).sum();
        let row: u64 = (0..self.classes).map(|p| self.get(c, p)).sum();
        (tp, col - tp, row - tp)
    }

    /// `(f1, iou)` of class `c`.
    pub fn class_scores(&self, c: usize) -> (f64, f64) {
        let (tp, fp, fneg) = self.tp_fp_fn(c);
        scores_from_counts(tp, fp, fneg)
    }

    pub fn mean_scores(&self, included: &[usize]) -> Result<MetricsReport, MetricsError> {
        if included.is_empty() {
            return Err(MetricsError::EmptyIncluded);
        }
        if let Some(&bad) = included.iter().find(|&&c| c >= self.classes) {
            return Err(MetricsError::IncludedOutOfRange(bad, self.classes));
        }
        let per_class: Vec<ClassScore> = (0..self.classes)
            .map(|c| {
                let (f1, iou) = self.class_scores(c);
                ClassScore { class: c, f1, iou }
            })
            .collect();
        let n = included.len() as f64;
        let mean_f1 = included.iter().map(|&c| per_class[c].f1).sum::<f64>() / n;
        let mean_iou = included.iter().map(|&c| per_class[c].iou).sum::<f64>() / n;
        Ok(MetricsReport {
            per_class,
            included: included.to_vec(),
            mean_f1,
            mean_iou,
        })
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 as the harmonic mean of precision and recall; IoU as
/// `TP / (TP + FP + FN)`.
pub fn scores_from_counts(tp: u64, fp: u64, fneg: u64) -> (f64, f64) {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (f1, ratio(tp, tp + fp + fneg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore {
    pub class: usize,
    pub f1: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Scores of every class, included or not.
    pub per_class: Vec<ClassScore>,
    pub included: Vec<usize>,
    pub mean_f1: f64,
    pub mean_iou: f64,
}

impl MetricsReport {
    /// Text table with one `F1/IoU` row per class (percentages) followed by
    /// the means. `names` may be shorter than the class count.
    pub fn to_text(&self, names: &[&str]) -> String {
        let mut out = String::new();
        writeln!(out, "[per_class]").unwrap();
        writeln!(out, "# class name included f1/iou").unwrap();
        for s in &self.per_class {
            let name = names.get(s.class).copied().unwrap_or("-");
            let inc = if self.included.contains(&s.class) { "yes" } else { "no" };
            writeln!(
                out,
                "{} {} {} {:.2}/{:.2}",
                s.class,
                name,
                inc,
                100.0 * s.f1,
                100.0 * s.iou
            )
            .unwrap();
        }
        writeln!(out, "[summary]").unwrap();
        let inc: Vec<String> = self.included.iter().map(|c| c.to_string()).collect();
        writeln!(out, "included = {}", inc.join(",")).unwrap();
        writeln!(out, "mF1 = {}", self.mean_f1).unwrap();
        writeln!(out, "mIoU = {}", self.mean_iou).unwrap();
        out
    }
}

/// Class layout and evaluated subset of a benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricProfile {
    pub names: Vec<&'static str>,
    pub included: Vec<usize>,
}

impl MetricProfile {
    /// Five foreground classes scored; clutter (index 5) excluded.
    pub fn vaihingen() -> Self {
        Self {
            names: vec![
                "impervious_surface",
                "building",
                "low_vegetation",
                "tree",
                "car",
                "clutter",
            ],
            included: vec![0, 1, 2, 3, 4],
        }
    }

    /// All seven classes scored.
    pub fn loveda() -> Self {
        Self {
            names: vec![
                "background",
                "building",
                "road",
                "water",
                "barren",
                "forest",
                "agriculture",
            ],
            included: (0..7).collect(),
        }
    }

    pub fn classes(&self) -> usize {
        self.names.len()
    }
}
