//! Sliding-window tiling and overlap-averaged stitching.
//!
//! Window positions step by `stride` and the last position on each axis is
//! snapped to the image edge, so every pixel is covered without padding.

mod augment;

pub use augment::{augment, Dihedral, TileBundle};

use thiserror::Error;

use crate::grids::{GridError, ProbGrid, RealGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TilingError {
    #[error("window {window} does not fit a {height}x{width} image")]
    WindowTooLarge { window: usize, height: usize, width: usize },
    #[error("stride {stride} must be in 1..={window}")]
    InvalidStride { stride: usize, window: usize },
    #[error("tile components must be square and equally sized, got {0:?}")]
    NonSquareTile(Vec<(usize, usize)>),
    #[error("tile {tile:?} at ({row}, {col}) does not fit the {height}x{width}x{channels} accumulator")]
    TileOutOfBounds {
        tile: (usize, usize, usize),
        row: usize,
        col: usize,
        height: usize,
        width: usize,
        channels: usize,
    },
    #[error("pixel ({y}, {x}) was never covered by a tile")]
    Uncovered { y: usize, x: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Window size, stride and the resulting top-left corners.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileSpec {
    pub window: usize,
    pub stride: usize,
    pub positions: Vec<(usize, usize)>,
}

fn axis_positions(len: usize, window: usize, stride: usize) -> Vec<usize> {
    let last = len - window;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().unwrap() != last {
        out.push(last);
    }
    out
}

pub fn tile_positions(height: usize, width: usize, window: usize, stride: usize) -> Result<TileSpec, TilingError> {
    if window == 0 || window > height || window > width {
        return Err(TilingError::WindowTooLarge { window, height, width });
    }
    if stride == 0 || stride > window {
        return Err(TilingError::InvalidStride { stride, window });
    }
    let rows = axis_positions(height, window, stride);
    let cols = axis_positions(width, window, stride);
    let positions = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();
    Ok(TileSpec {
        window,
        stride,
        positions,
    })
}

/// Running per-element mean of tile predictions and per-pixel coverage.
///
/// The mean is updated incrementally, so overlapping identical predictions
/// average back to exactly the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    height: usize,
    width: usize,
    channels: usize,
    mean: Vec<f64>,
    count: Vec<u32>,
}

impl Accumulator {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            mean: vec![0.0; height * width * channels],
            count: vec![0; height * width],
        }
    }

    pub fn count(&self) -> &[u32] {
        &self.count
    }

    /// Adds a tile prediction with top-left corner `(row, col)`.
    pub fn stitch(&mut self, tile: &ProbGrid, row: usize, col: usize) -> Result<(), TilingError> {
        let (th, tw, tc) = tile.shape();
        if tc != self.channels || row + th > self.height || col + tw > self.width {
            return Err(TilingError::TileOutOfBounds {
                tile: (th, tw, tc),
                row,
                col,
                height: self.height,
                width: self.width,
                channels: self.channels,
            });
        }
        let c = self.channels;
        for y in 0..th {
            for x in 0..tw {
                let pixel = (row + y) * self.width + col + x;
                self.count[pixel] += 1;
                let n = f64::from(self.count[pixel]);
                let acc = &mut self.mean[pixel * c..(pixel + 1) * c];
                for (m, &v) in acc.iter_mut().zip(tile.pixel(y, x)) {
                    *m += (v - *m) / n;
                }
            }
        }
        Ok(())
    }

    /// Per-pixel mean of all stitched tiles. Pixels whose mean drifts from
    /// the simplex by more than `1e-12` are renormalised.
    pub fn finalize(&self) -> Result<ProbGrid, TilingError> {
        if let Some(pixel) = self.count.iter().position(|&n| n == 0) {
            return Err(TilingError::Uncovered {
                y: pixel / self.width,
                x: pixel % self.width,
            });
        }
        let mut data = self.mean.clone();
        for px in data.chunks_exact_mut(self.channels) {
            let sum: f64 = px.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                px.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(ProbGrid::new(RealGrid::new(
            self.height,
            self.width,
            self.channels,
            data,
        )?)?)
    }
}

/// Sliding-window inference: runs `predict` on every window of `image` and
/// averages the overlapping outputs.
pub fn sliding_predict<F>(
    image: &RealGrid,
    window: usize,
    stride: usize,
    mut predict: F,
) -> Result<ProbGrid, crate::Error>
where
    F: FnMut(&RealGrid) -> Result<ProbGrid, crate::Error>,
{
    let spec = tile_positions(image.height(), image.width(), window, stride)?;
    let mut acc: Option<Accumulator> = None;
    for &(row, col) in &spec.positions {
        let tile = image.crop(row, col, window).map_err(TilingError::from)?;
        let probs = predict(&tile)?;
        let acc = acc.get_or_insert_with(|| Accumulator::new(image.height(), image.width(), probs.channels()));
        acc.stitch(&probs, row, col)?;
    }
    Ok(acc.expect("at least one window").finalize()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(h: usize, w: usize, probs: &[f64]) -> ProbGrid {
        let data = probs.iter().copied().cycle().take(h * w * probs.len()).collect();
        ProbGrid::new(RealGrid::new(h, w, probs.len(), data).unwrap()).unwrap()
    }

    #[test]
    fn positions_for_default_window() {
        assert_eq!(tile_positions(512, 512, 256, 256).unwrap().positions.len(), 4);
        for stride in [1, 32, 256] {
            assert_eq!(tile_positions(256, 256, 256, stride).unwrap().positions, vec![(0, 0)]);
        }
    }

    #[test]
    fn last_column_snaps_to_edge() {
        let spec = tile_positions(256, 300, 256, 256).unwrap();
        assert_eq!(spec.positions, vec![(0, 0), (0, 44)]);
    }

    #[test]
    fn bad_windows_rejected() {
        assert!(matches!(
            tile_positions(100, 300, 256, 32),
            Err(TilingError::WindowTooLarge { .. })
        ));
        assert!(matches!(
            tile_positions(300, 300, 256, 0),
            Err(TilingError::InvalidStride { .. })
        ));
        assert!(tile_positions(300, 300, 256, 300).is_err());
    }

    #[test]
    fn single_tile_round_trips() {
        let data = vec![0.2, 0.8, 0.6, 0.4, 0.1, 0.9, 0.5, 0.5];
        let tile = ProbGrid::new(RealGrid::new(2, 2, 2, data).unwrap()).unwrap();
        let mut acc = Accumulator::new(2, 2, 2);
        acc.stitch(&tile, 0, 0).unwrap();
        assert_eq!(acc.finalize().unwrap(), tile);
        acc.stitch(&tile, 0, 0).unwrap();
        assert_eq!(acc.finalize().unwrap(), tile);
    }

    #[test]
    fn half_overlap_averages() {
        let (a, b) = ([0.2, 0.8], [0.6, 0.4]);
        let mut acc = Accumulator::new(2, 3, 2);
        acc.stitch(&constant(2, 2, &a), 0, 0).unwrap();
        acc.stitch(&constant(2, 2, &b), 0, 1).unwrap();
        let out = acc.finalize().unwrap();
        assert_eq!(out.pixel(0, 0), &a);
        assert_eq!(out.pixel(1, 2), &b);
        for y in 0..2 {
            assert!((out.get(y, 1, 0) - 0.4).abs() < 1e-15);
            assert!((out.get(y, 1, 1) - 0.6).abs() < 1e-15);
        }
    }

    #[test]
    fn uncovered_pixels_fail() {
        let mut acc = Accumulator::new(3, 3, 2);
        acc.stitch(&constant(2, 2, &[0.5, 0.5]), 0, 0).unwrap();
        assert!(matches!(acc.finalize(), Err(TilingError::Uncovered { y: 0, x: 2 })));
        assert!(matches!(
            acc.stitch(&constant(2, 2, &[0.5, 0.5]), 2, 2),
            Err(TilingError::TileOutOfBounds { .. })
        ));
    }
}
