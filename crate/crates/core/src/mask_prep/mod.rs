//! Conversion of class-agnostic segmenter masks into an object map (SGO)
//! and a boundary map (SGB).
//!
//! Masks smaller than `min_pixels` are dropped, the rest are ordered by
//! area (largest first, archive order on ties) and the first `max_objects`
//! are painted so that smaller masks overwrite larger ones. Each painted
//! region's exterior boundary is written to the SGB and cleared in the SGO.

mod archive;

pub use archive::{decode_archive, ArchiveError, MaskArchive, RleMask, SegmenterSettings};

use thiserror::Error;

use crate::grids::{BoundaryGrid, ObjectGrid, BOUNDARY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrepError {
    #[error("max_objects must be at least 1")]
    ZeroMaxObjects,
    #[error("max_objects {0} exceeds the 16-bit identifier range")]
    TooManyObjects(usize),
}

/// Object-count cap `K` and minimum mask area `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrepParams {
    pub max_objects: usize,
    pub min_pixels: usize,
}

impl Default for PrepParams {
    fn default() -> Self {
        Self {
            max_objects: 50,
            min_pixels: 50,
        }
    }
}

impl PrepParams {
    pub fn validate(&self) -> Result<(), PrepError> {
        if self.max_objects == 0 {
            return Err(PrepError::ZeroMaxObjects);
        }
        if self.max_objects > u16::MAX as usize {
            return Err(PrepError::TooManyObjects(self.max_objects));
        }
        Ok(())
    }
}

/// Mask pixels with a 4-neighbour outside the mask. Pixels on the image
/// border count as boundary.
pub fn exterior_boundary(mask: &[bool], height: usize, width: usize) -> Vec<bool> {
    assert_eq!(mask.len(), height * width, "mask size mismatch");
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            out[i] = mask[i]
                && (y == 0
                    || x == 0
                    || y + 1 == height
                    || x + 1 == width
                    || !mask[i - width]
                    || !mask[i - 1]
                    || !mask[i + 1]
                    || !mask[i + width]);
        }
    }
    out
}

/// Builds the SGO/SGB pair for one archive.
///
/// Object identifiers follow paint order. Objects whose painted region is
/// entirely boundary (or fully overwritten) vanish and the remaining
/// identifiers are renumbered to stay contiguous.
pub fn generate_sgo_sgb(archive: &MaskArchive, params: &PrepParams) -> Result<(ObjectGrid, BoundaryGrid), PrepError> {
    params.validate()?;
    let (h, w) = (archive.height, archive.width);
    let pixels = h * w;

    let mut survivors: Vec<&RleMask> = archive.masks.iter().filter(|m| m.area >= params.min_pixels).collect();
    survivors.sort_by_key(|m| std::cmp::Reverse(m.area));
    survivors.truncate(params.max_objects);

    let mut paint = vec![0u16; pixels];
    for (k, mask) in survivors.iter().enumerate() {
        let id = (k + 1) as u16;
        for &(start, len) in &mask.runs {
            paint[start..start + len].fill(id);
        }
    }

    let mut boundary = vec![false; pixels];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let id = paint[i];
            if id == 0 {
                continue;
            }
            boundary[i] = y == 0
                || x == 0
                || y + 1 == h
                || x + 1 == w
                || paint[i - w] != id
                || paint[i - 1] != id
                || paint[i + 1] != id
                || paint[i + w] != id;
        }
    }

    let mut remap = vec![0u16; survivors.len() + 1];
    for (i, &id) in paint.iter().enumerate() {
        if !boundary[i] && id != 0 {
            remap[id as usize] = 1;
        }
    }
    let mut next = 0u16;
    for slot in remap.iter_mut().skip(1) {
        if *slot != 0 {
            next += 1;
            *slot = next;
        }
    }

    let sgo = paint
        .iter()
        .zip(&boundary)
        .map(|(&id, &b)| if b { 0 } else { remap[id as usize] })
        .collect();
    let sgb = boundary.iter().map(|&b| if b { BOUNDARY } else { 0 }).collect();
    Ok((
        ObjectGrid::new(h, w, sgo).expect("sized by archive"),
        BoundaryGrid::new(h, w, sgb).expect("values are 0 or 255"),
    ))
}
