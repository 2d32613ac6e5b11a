//! Dense per-pixel grids shared by every stage of the pipeline.
//!
//! All grids are row-major. Multi-channel grids keep the channel index
//! innermost, so element `(y, x, c)` lives at `(y * width + x) * channels + c`.

mod pgrd;
mod pnm;

pub use pgrd::{read_pgrd, read_pgrd_from, write_pgrd, write_pgrd_to, PgrdError};
pub use pnm::{load_pnm, read_pnm, save_pnm, write_pnm, PnmError, PnmGrid, Raster};

use thiserror::Error;

/// Maximum allowed deviation of a probability vector's sum from one.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid data length {actual} does not match {height}x{width}x{channels}")]
    LengthMismatch {
        height: usize,
        width: usize,
        channels: usize,
        actual: usize,
    },
    #[error("grid must have at least one channel")]
    NoChannels,
    #[error("non-finite value {value} at element {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("probability {value} at element {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("probabilities at pixel ({y}, {x}) sum to {sum}, expected 1")]
    ProbabilitySum { y: usize, x: usize, sum: f64 },
    #[error("boundary grid holds value {value} at pixel {index}; only 0 and 255 are allowed")]
    BoundaryValue { index: usize, value: u8 },
    #[error("object identifier {value} at pixel {index} exceeds the limit {limit}")]
    ObjectIdOutOfRange { index: usize, value: u16, limit: u16 },
    #[error("spatial shape {actual:?} does not match expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("crop of size {size} at ({row}, {col}) exceeds {height}x{width} grid")]
    CropOutOfBounds {
        row: usize,
        col: usize,
        size: usize,
        height: usize,
        width: usize,
    },
}

fn check_len(height: usize, width: usize, channels: usize, actual: usize) -> Result<(), GridError> {
    if height * width * channels != actual {
        return Err(GridError::LengthMismatch {
            height,
            width,
            channels,
            actual,
        });
    }
    Ok(())
}

fn check_crop(row: usize, col: usize, size: usize, height: usize, width: usize) -> Result<(), GridError> {
    if row + size > height || col + size > width {
        return Err(GridError::CropOutOfBounds {
            row,
            col,
            size,
            height,
            width,
        });
    }
    Ok(())
}

fn crop_plane<T: Copy>(data: &[T], width: usize, channels: usize, row: usize, col: usize, size: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(size * size * channels);
    for y in row..row + size {
        let start = (y * width + col) * channels;
        out.extend_from_slice(&data[start..start + size * channels]);
    }
    out
}

/// A real-valued `H x W x C` grid: network scores, gradients, and image
/// intensities all use this representation.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

/// Pre-activation class scores.
pub type ScoreGrid = RealGrid;

impl RealGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self, GridError> {
        if channels == 0 {
            return Err(GridError::NoChannels);
        }
        check_len(height, width, channels, data.len())?;
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        assert!(channels > 0, "grid must have at least one channel");
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        let mut grid = Self::zeros(height, width, channels);
        grid.data.fill(value);
        grid
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    /// Channel vector of pixel `(y, x)`.
    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Channel vector of the pixel with row-major index `pixel`.
    #[inline]
    pub fn pixel_at(&self, pixel: usize) -> &[f64] {
        &self.data[pixel * self.channels..(pixel + 1) * self.channels]
    }

    /// One channel extracted as a dense `H x W` plane.
    pub fn channel_plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(GridError::NonFinite {
                index,
                value: self.data[index],
            }),
            None => Ok(()),
        }
    }

    /// Square window with top-left corner `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, size: usize) -> Result<Self, GridError> {
        check_crop(row, col, size, self.height, self.width)?;
        Ok(Self {
            height: size,
            width: size,
            channels: self.channels,
            data: crop_plane(&self.data, self.width, self.channels, row, col, size),
        })
    }

    /// `self += scale * other`, elementwise.
    pub fn add_scaled(&mut self, other: &RealGrid, scale: f64) {
        assert_eq!(self.shape(), other.shape(), "grid shapes differ");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }
}

/// Per-pixel class probabilities.
///
/// Every value lies in `[0, 1]` and each pixel's channels sum to one within
/// [`PROB_SUM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbGrid(RealGrid);

impl ProbGrid {
    pub fn new(grid: RealGrid) -> Result<Self, GridError> {
        for (index, &value) in grid.data.iter().enumerate() {
            if !value.is_finite() {
                return Err(GridError::NonFinite { index, value });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(GridError::ProbabilityOutOfRange { index, value });
            }
        }
        for y in 0..grid.height {
            for x in 0..grid.width {
                let sum: f64 = grid.pixel(y, x).iter().sum();
                if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                    return Err(GridError::ProbabilitySum { y, x, sum });
                }
            }
        }
        Ok(Self(grid))
    }

    /// Wraps a grid without checking the simplex invariant.
    ///
    /// Loss functions are defined for arbitrary finite inputs, and
    /// finite-difference probes step single elements off the simplex.
    pub fn new_unchecked(grid: RealGrid) -> Self {
        Self(grid)
    }

    /// Uniform distribution `1 / C` everywhere.
    pub fn uniform(height: usize, width: usize, channels: usize) -> Self {
        Self(RealGrid::filled(height, width, channels, 1.0 / channels as f64))
    }

    pub fn as_real(&self) -> &RealGrid {
        &self.0
    }

    pub fn into_real(self) -> RealGrid {
        self.0
    }

    pub fn crop(&self, row: usize, col: usize, size: usize) -> Result<Self, GridError> {
        self.0.crop(row, col, size).map(Self)
    }

    /// Most probable class per pixel; ties resolve to the lowest class index.
    pub fn argmax(&self) -> LabelGrid {
        let g = &self.0;
        let mut labels = Vec::with_capacity(g.pixels());
        for px in g.data.chunks_exact(g.channels) {
            let mut best = 0;
            for (c, &v) in px.iter().enumerate() {
                if v > px[best] {
                    best = c;
                }
            }
            labels.push(best as u16);
        }
        LabelGrid {
            height: g.height,
            width: g.width,
            data: labels,
            ignore: None,
        }
    }
}

impl std::ops::Deref for ProbGrid {
    type Target = RealGrid;

    fn deref(&self) -> &RealGrid {
        &self.0
    }
}

/// Numerically stable per-pixel softmax over channels.
pub fn softmax(scores: &ScoreGrid) -> Result<ProbGrid, GridError> {
    scores.check_finite()?;
    let mut out = scores.clone();
    for px in out.data.chunks_exact_mut(scores.channels) {
        let max = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in px.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in px.iter_mut() {
            *v /= sum;
        }
    }
    Ok(ProbGrid(out))
}

/// Ground-truth class map with an optional ignore marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    height: usize,
    width: usize,
    data: Vec<u16>,
    ignore: Option<u16>,
}

impl LabelGrid {
    pub fn new(height: usize, width: usize, data: Vec<u16>) -> Result<Self, GridError> {
        check_len(height, width, 1, data.len())?;
        Ok(Self {
            height,
            width,
            data,
            ignore: None,
        })
    }

    pub fn with_ignore(mut self, marker: Option<u16>) -> Self {
        self.ignore = marker;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn ignore(&self) -> Option<u16> {
        self.ignore
    }

    pub fn is_ignored(&self, value: u16) -> bool {
        self.ignore == Some(value)
    }

    /// Checks every non-ignored value is a valid class index.
    pub fn check_classes(&self, classes: usize) -> Result<(), (usize, u16)> {
        match self
            .data
            .iter()
            .position(|&v| !self.is_ignored(v) && v as usize >= classes)
        {
            Some(i) => Err((i, self.data[i])),
            None => Ok(()),
        }
    }

    pub fn crop(&self, row: usize, col: usize, size: usize) -> Result<Self, GridError> {
        check_crop(row, col, size, self.height, self.width)?;
        Ok(Self {
            height: size,
            width: size,
            data: crop_plane(&self.data, self.width, 1, row, col, size),
            ignore: self.ignore,
        })
    }
}

/// Object identifier map: 0 marks unsegmented or boundary pixels, `1..=n`
/// index objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectGrid {
    height: usize,
    width: usize,
    data: Vec<u16>,
}

impl ObjectGrid {
    pub fn new(height: usize, width: usize, data: Vec<u16>) -> Result<Self, GridError> {
        check_len(height, width, 1, data.len())?;
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn max_id(&self) -> u16 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn check_limit(&self, limit: u16) -> Result<(), GridError> {
        match self.data.iter().position(|&v| v > limit) {
            Some(index) => Err(GridError::ObjectIdOutOfRange {
                index,
                value: self.data[index],
                limit,
            }),
            None => Ok(()),
        }
    }

    /// True when the identifiers in use are exactly `1..=max_id`.
    pub fn is_compact(&self) -> bool {
        let max = self.max_id() as usize;
        let mut seen = vec![false; max + 1];
        for &v in &self.data {
            seen[v as usize] = true;
        }
        seen.iter().skip(1).all(|&s| s)
    }

    /// Pixel count per identifier, indexed by identifier (entry 0 counts
    /// unassigned pixels).
    pub fn object_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.max_id() as usize + 1];
        for &v in &self.data {
            sizes[v as usize] += 1;
        }
        sizes
    }

    pub fn crop(&self, row: usize, col: usize, size: usize) -> Result<Self, GridError> {
        check_crop(row, col, size, self.height, self.width)?;
        Ok(Self {
            height: size,
            width: size,
            data: crop_plane(&self.data, self.width, 1, row, col, size),
        })
    }
}

/// Boundary marker value used in [`BoundaryGrid`].
pub const BOUNDARY: u8 = 255;

/// Binary boundary map holding only 0 and [`BOUNDARY`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryGrid {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BoundaryGrid {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self, GridError> {
        check_len(height, width, 1, data.len())?;
        if let Some(index) = data.iter().position(|&v| v != 0 && v != BOUNDARY) {
            return Err(GridError::BoundaryValue {
                index,
                value: data[index],
            });
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn from_mask(height: usize, width: usize, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), height * width);
        Self {
            height,
            width,
            data: mask.iter().map(|&b| if b { BOUNDARY } else { 0 }).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == BOUNDARY).count()
    }

    /// Boundary indicator as reals in `{0, 1}`.
    pub fn to_unit(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v) / 255.0).collect()
    }

    pub fn crop(&self, row: usize, col: usize, size: usize) -> Result<Self, GridError> {
        check_crop(row, col, size, self.height, self.width)?;
        Ok(Self {
            height: size,
            width: size,
            data: crop_plane(&self.data, self.width, 1, row, col, size),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(c: usize, v: Vec<f64>) -> ScoreGrid {
        RealGrid::new(1, v.len() / c, c, v).unwrap()
    }

    #[test]
    fn softmax_of_equal_scores_is_uniform() {
        let p = softmax(&scores(2, vec![0.0, 0.0])).unwrap();
        assert_eq!(p.data(), &[0.5, 0.5]);
        for x in [-7.5, 0.0, 3.25, 1e4] {
            let p = softmax(&scores(3, vec![x, x, x])).unwrap();
            for &v in p.data() {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_closed_form() {
        let p = softmax(&scores(2, vec![3f64.ln(), 0.0])).unwrap();
        assert!((p.data()[0] - 0.75).abs() < 1e-15);
        assert!((p.data()[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        let err = softmax(&scores(2, vec![f64::NAN, 0.0])).unwrap_err();
        assert!(matches!(err, GridError::NonFinite { index: 0, .. }));
        assert!(softmax(&scores(2, vec![0.0, f64::INFINITY])).is_err());
    }

    #[test]
    fn prob_grid_validation() {
        let bad = RealGrid::new(1, 1, 2, vec![0.7, 0.7]).unwrap();
        assert!(matches!(ProbGrid::new(bad), Err(GridError::ProbabilitySum { .. })));
        let neg = RealGrid::new(1, 1, 2, vec![1.5, -0.5]).unwrap();
        assert!(matches!(
            ProbGrid::new(neg),
            Err(GridError::ProbabilityOutOfRange { .. })
        ));
        assert!(ProbGrid::new(RealGrid::new(1, 1, 2, vec![0.25, 0.75]).unwrap()).is_ok());
    }

    #[test]
    fn boundary_grid_rejects_other_values() {
        assert!(BoundaryGrid::new(1, 2, vec![0, 255]).is_ok());
        assert!(matches!(
            BoundaryGrid::new(1, 2, vec![0, 1]),
            Err(GridError::BoundaryValue { index: 1, value: 1 })
        ));
    }

    #[test]
    fn crop_takes_row_major_window() {
        let g = RealGrid::new(3, 3, 1, (0..9).map(f64::from).collect()).unwrap();
        let c = g.crop(1, 1, 2).unwrap();
        assert_eq!(c.data(), &[4.0, 5.0, 7.0, 8.0]);
        assert!(g.crop(2, 0, 2).is_err());
    }

    #[test]
    fn compactness() {
        assert!(ObjectGrid::new(1, 3, vec![0, 1, 2]).unwrap().is_compact());
        assert!(!ObjectGrid::new(1, 3, vec![0, 1, 3]).unwrap().is_compact());
        assert!(ObjectGrid::zeros(2, 2).is_compact());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in prop::collection::vec(-1e4f64..1e4, 1..40), c in 1usize..5) {
            let n = v.len() / c * c;
            prop_assume!(n > 0);
            let p = softmax(&scores(c, v[..n].to_vec())).unwrap();
            for px in p.data().chunks(c) {
                let s: f64 = px.iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-6);
            }
        }

        #[test]
        fn softmax_shift_invariant(v in prop::collection::vec(-50f64..50.0, 3..30), shift in -100f64..100.0) {
            let n = v.len() / 3 * 3;
            let base = softmax(&scores(3, v[..n].to_vec())).unwrap();
            let shifted: Vec<f64> = v[..n].iter().map(|x| x + shift).collect();
            let moved = softmax(&scores(3, shifted)).unwrap();
            for (a, b) in base.data().iter().zip(moved.data()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
