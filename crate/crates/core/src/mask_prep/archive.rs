//! Run-length mask archives exported by a promptable segmenter.
//!
//! ```json
//! { "height": 4, "width": 4,
//!   "masks": [ { "area": 4, "predicted_iou": 0.97, "runs": [[0, 4]] } ] }
//! ```
//!
//! Run starts are 0-based row-major pixel indices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("archive is not valid JSON for the mask schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("archive dimensions {height}x{width} are empty")]
    EmptyImage { height: usize, width: usize },
    #[error("mask {mask}: run {run} has zero length")]
    EmptyRun { mask: usize, run: usize },
    #[error("mask {mask}: run {run} overlaps or precedes the previous run")]
    OverlappingRuns { mask: usize, run: usize },
    #[error("mask {mask}: run {run} ends at {end}, beyond {pixels} pixels")]
    OutOfBounds {
        mask: usize,
        run: usize,
        end: usize,
        pixels: usize,
    },
    #[error("mask {mask}: declared area {declared} differs from run total {actual}")]
    AreaMismatch {
        mask: usize,
        declared: usize,
        actual: usize,
    },
}

/// Segmenter settings the archive was produced with. Carried as metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterSettings {
    pub crop_nms_thresh: f64,
    pub box_nms_thresh: f64,
    pub pred_iou_thresh: f64,
}

impl Default for SegmenterSettings {
    fn default() -> Self {
        Self {
            crop_nms_thresh: 0.5,
            box_nms_thresh: 0.5,
            pred_iou_thresh: 0.96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RleMask {
    pub area: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_iou: Option<f64>,
    /// `(start, length)` pairs, sorted and disjoint.
    pub runs: Vec<(usize, usize)>,
}

impl RleMask {
    /// Builds a mask from a row-major bitmap.
    pub fn from_bitmap(bitmap: &[bool]) -> Self {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < bitmap.len() {
            if bitmap[i] {
                let start = i;
                while i < bitmap.len() && bitmap[i] {
                    i += 1;
                }
                runs.push((start, i - start));
            } else {
                i += 1;
            }
        }
        let area = runs.iter().map(|r| r.1).sum();
        Self {
            area,
            predicted_iou: None,
            runs,
        }
    }

    pub fn to_bitmap(&self, pixels: usize) -> Vec<bool> {
        let mut out = vec![false; pixels];
        for &(start, len) in &self.runs {
            out[start..start + len].fill(true);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskArchive {
    pub height: usize,
    pub width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmenter: Option<SegmenterSettings>,
    pub masks: Vec<RleMask>,
}

impl MaskArchive {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Checks run ordering, bounds and declared areas.
    pub fn validate(&self) -> Result<(), ArchiveError> {
        if self.height == 0 || self.width == 0 {
            return Err(ArchiveError::EmptyImage {
                height: self.height,
                width: self.width,
            });
        }
        let pixels = self.pixels();
        for (m, mask) in self.masks.iter().enumerate() {
            let mut prev_end = 0;
            let mut total = 0;
            for (r, &(start, len)) in mask.runs.iter().enumerate() {
                if len == 0 {
                    return Err(ArchiveError::EmptyRun { mask: m, run: r });
                }
                if r > 0 && start < prev_end {
                    return Err(ArchiveError::OverlappingRuns { mask: m, run: r });
                }
                let end = start.saturating_add(len);
                if end > pixels {
                    return Err(ArchiveError::OutOfBounds {
                        mask: m,
                        run: r,
                        end,
                        pixels,
                    });
                }
                prev_end = end;
                total += len;
            }
            if total != mask.area {
                return Err(ArchiveError::AreaMismatch {
                    mask: m,
                    declared: mask.area,
                    actual: total,
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("archive serialization cannot fail")
    }
}

/// Parses and validates an archive document.
pub fn decode_archive(text: &str) -> Result<MaskArchive, ArchiveError> {
    let archive: MaskArchive = serde_json::from_str(text)?;
    archive.validate()?;
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_archive() {
        let a = decode_archive(r#"{"height": 3, "width": 2, "masks": []}"#).unwrap();
        assert!(a.masks.is_empty());
        assert_eq!(a.pixels(), 6);
    }

    #[test]
    fn single_run_covers_first_row() {
        let a = decode_archive(r#"{"height": 4, "width": 4, "masks": [{"area": 4, "runs": [[0, 4]]}]}"#).unwrap();
        let bits = a.masks[0].to_bitmap(16);
        assert!(bits[..4].iter().all(|&b| b));
        assert!(bits[4..].iter().all(|&b| !b));
    }

    #[test]
    fn distinct_errors() {
        let doc = |masks: &str| format!(r#"{{"height": 4, "width": 4, "masks": [{masks}]}}"#);
        assert!(matches!(
            decode_archive(&doc(r#"{"area": 3, "runs": [[0, 4]]}"#)),
            Err(ArchiveError::AreaMismatch {
                declared: 3,
                actual: 4,
                ..
            })
        ));
        assert!(matches!(
            decode_archive(&doc(r#"{"area": 6, "runs": [[0, 4], [2, 2]]}"#)),
            Err(ArchiveError::OverlappingRuns { run: 1, .. })
        ));
        assert!(matches!(
            decode_archive(&doc(r#"{"area": 4, "runs": [[14, 4]]}"#)),
            Err(ArchiveError::OutOfBounds { end: 18, .. })
        ));
        assert!(matches!(
            decode_archive(&doc(r#"{"area": 0, "runs": [[1, 0]]}"#)),
            Err(ArchiveError::EmptyRun { .. })
        ));
        assert!(matches!(
            decode_archive(r#"{"height": 4}"#),
            Err(ArchiveError::Parse(_))
        ));
    }

    #[test]
    fn metadata_and_iou_survive() {
        let text = r#"{"height": 2, "width": 2,
            "segmenter": {"crop_nms_thresh": 0.5, "box_nms_thresh": 0.5, "pred_iou_thresh": 0.96},
            "masks": [{"area": 2, "predicted_iou": 0.98, "runs": [[1, 2]]}]}"#;
        let a = decode_archive(text).unwrap();
        assert_eq!(a.segmenter, Some(SegmenterSettings::default()));
        assert_eq!(a.masks[0].predicted_iou, Some(0.98));
        assert_eq!(decode_archive(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn bitmap_runs_round_trip() {
        let bits = [true, true, false, true, false, false, true];
        let m = RleMask::from_bitmap(&bits);
        assert_eq!(m.runs, vec![(0, 2), (3, 1), (6, 1)]);
        assert_eq!(m.area, 4);
        assert_eq!(m.to_bitmap(bits.len()), bits);
    }
}
