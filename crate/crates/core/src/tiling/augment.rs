use crate::grids::{BoundaryGrid, LabelGrid, ObjectGrid, RealGrid};

use super::TilingError;

/// The eight symmetries of a square tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dihedral {
    Identity,
    /// Quarter turn clockwise.
    Rot90,
    Rot180,
    Rot270,
    /// Mirror left-right.
    FlipH,
    /// Mirror top-bottom.
    FlipV,
    /// Mirror across the main diagonal.
    Transpose,
    /// Mirror across the anti-diagonal.
    AntiTranspose,
}

impl Dihedral {
    pub const ALL: [Dihedral; 8] = [
        Dihedral::Identity,
        Dihedral::Rot90,
        Dihedral::Rot180,
        Dihedral::Rot270,
        Dihedral::FlipH,
        Dihedral::FlipV,
        Dihedral::Transpose,
        Dihedral::AntiTranspose,
    ];

    pub fn inverse(self) -> Self {
        match self {
            Dihedral::Rot90 => Dihedral::Rot270,
            Dihedral::Rot270 => Dihedral::Rot90,
            other => other,
        }
    }

    /// Destination of source pixel `(y, x)` in an `n x n` tile.
    fn map(self, n: usize, y: usize, x: usize) -> (usize, usize) {
        let m = n - 1;
        match self {
            Dihedral::Identity => (y, x),
            Dihedral::Rot90 => (x, m - y),
            Dihedral::Rot180 => (m - y, m - x),
            Dihedral::Rot270 => (m - x, y),
            Dihedral::FlipH => (y, m - x),
            Dihedral::FlipV => (m - y, x),
            Dihedral::Transpose => (x, y),
            Dihedral::AntiTranspose => (m - x, m - y),
        }
    }

    /// Applies the transform to row-major `n x n x channels` data.
    pub fn apply<T: Copy>(self, data: &[T], n: usize, channels: usize) -> Vec<T> {
        assert_eq!(data.len(), n * n * channels, "tile size mismatch");
        if self == Dihedral::Identity {
            return data.to_vec();
        }
        let mut out = data.to_vec();
        for y in 0..n {
            for x in 0..n {
                let (ty, tx) = self.map(n, y, x);
                let src = (y * n + x) * channels;
                let dst = (ty * n + tx) * channels;
                out[dst..dst + channels].copy_from_slice(&data[src..src + channels]);
            }
        }
        out
    }
}

/// Image, labels, object map and boundary map of one training tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBundle {
    pub image: RealGrid,
    pub labels: LabelGrid,
    pub sgo: ObjectGrid,
    pub sgb: BoundaryGrid,
}

impl TileBundle {
    /// Tile side length, or an error if any component is not square or the
    /// components disagree in size.
    pub fn side(&self) -> Result<usize, TilingError> {
        let n = self.image.height();
        let dims = [
            (self.image.height(), self.image.width()),
            (self.labels.height(), self.labels.width()),
            (self.sgo.height(), self.sgo.width()),
            (self.sgb.height(), self.sgb.width()),
        ];
        if dims.iter().any(|&(h, w)| h != n || w != n) {
            return Err(TilingError::NonSquareTile(dims.to_vec()));
        }
        Ok(n)
    }
}

/// Applies the same transform to every component of the bundle.
pub fn augment(bundle: &TileBundle, op: Dihedral) -> Result<TileBundle, TilingError> {
    let n = bundle.side()?;
    let c = bundle.image.channels();
    let image = RealGrid::new(n, n, c, op.apply(bundle.image.data(), n, c))?;
    let labels = LabelGrid::new(n, n, op.apply(bundle.labels.data(), n, 1))?.with_ignore(bundle.labels.ignore());
    let sgo = ObjectGrid::new(n, n, op.apply(bundle.sgo.data(), n, 1))?;
    let sgb = BoundaryGrid::new(n, n, op.apply(bundle.sgb.data(), n, 1))?;
    Ok(TileBundle {
        image,
        labels,
        sgo,
        sgb,
    })
}
