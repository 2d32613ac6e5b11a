//! On-disk training sets: `image/NAME.ppm`, `label/NAME.pgm`, `sgo/NAME.pgm`
//! and `sgb/NAME.pgm` under one root directory.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grids::{load_pnm, save_pnm, BoundaryGrid, GridError, LabelGrid, ObjectGrid, PnmError, RealGrid};
use crate::tiling::TileBundle;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read directory {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Pnm(PathBuf, PnmError),
    #[error("{0} has no matching {1} file")]
    Missing(PathBuf, &'static str),
    #[error("dataset at {0} contains no images")]
    Empty(PathBuf),
    #[error("sample {name}: {what} is {actual:?}, image is {expected:?}")]
    ShapeMismatch {
        name: String,
        what: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },
}

/// One training image with its label, object and boundary maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub name: String,
    pub image: RealGrid,
    pub labels: LabelGrid,
    pub sgo: ObjectGrid,
    pub sgb: BoundaryGrid,
}

impl Sample {
    pub fn check(&self) -> Result<(), DatasetError> {
        let expected = (self.image.height(), self.image.width());
        for (what, actual) in [
            ("label", (self.labels.height(), self.labels.width())),
            ("sgo", (self.sgo.height(), self.sgo.width())),
            ("sgb", (self.sgb.height(), self.sgb.width())),
        ] {
            if actual != expected {
                return Err(DatasetError::ShapeMismatch {
                    name: self.name.clone(),
                    what,
                    expected,
                    actual,
                });
            }
        }
        Ok(())
    }

    /// Square crop of every component.
    pub fn tile(&self, row: usize, col: usize, size: usize) -> Result<TileBundle, GridError> {
        Ok(TileBundle {
            image: self.image.crop(row, col, size)?,
            labels: self.labels.crop(row, col, size)?,
            sgo: self.sgo.crop(row, col, size)?,
            sgb: self.sgb.crop(row, col, size)?,
        })
    }
}

fn pnm<T>(path: PathBuf, r: Result<T, PnmError>) -> Result<T, DatasetError> {
    r.map_err(|e| DatasetError::Pnm(path, e))
}

/// Loads every `image/*.ppm` with its companions, sorted by name. Label
/// pixels equal to `ignore` are excluded from the losses and metrics.
pub fn load_dataset(root: impl AsRef<Path>, ignore: Option<u16>) -> Result<Vec<Sample>, DatasetError> {
    let root = root.as_ref();
    let image_dir = root.join("image");
    let entries = std::fs::read_dir(&image_dir).map_err(|e| DatasetError::Io(image_dir.clone(), e))?;
    let mut names = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| DatasetError::Io(image_dir.clone(), e))?.path();
        if path.extension().is_some_and(|e| e == "ppm") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    if names.is_empty() {
        return Err(DatasetError::Empty(root.to_path_buf()));
    }
    names.sort();
    let mut samples = Vec::with_capacity(names.len());
    for name in names {
        let image_path = image_dir.join(format!("{name}.ppm"));
        let companion = |dir: &'static str| -> Result<PathBuf, DatasetError> {
            let p = root.join(dir).join(format!("{name}.pgm"));
            if p.is_file() {
                Ok(p)
            } else {
                Err(DatasetError::Missing(image_path.clone(), dir))
            }
        };
        let (lp, op, bp) = (companion("label")?, companion("sgo")?, companion("sgb")?);
        let image = pnm(image_path.clone(), load_pnm::<RealGrid>(&image_path))?;
        let labels = pnm(lp.clone(), load_pnm::<LabelGrid>(&lp))?.with_ignore(ignore);
        let sgo = pnm(op.clone(), load_pnm::<ObjectGrid>(&op))?;
        let sgb = pnm(bp.clone(), load_pnm::<BoundaryGrid>(&bp))?;
        let sample = Sample {
            name,
            image,
            labels,
            sgo,
            sgb,
        };
        sample.check()?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn save_dataset(root: impl AsRef<Path>, samples: &[Sample]) -> Result<(), DatasetError> {
    let root = root.as_ref();
    for dir in ["image", "label", "sgo", "sgb"] {
        let d = root.join(dir);
        std::fs::create_dir_all(&d).map_err(|e| DatasetError::Io(d, e))?;
    }
    for s in samples {
        let p = root.join("image").join(format!("{}.ppm", s.name));
        pnm(p.clone(), save_pnm(&p, &s.image))?;
        let p = root.join("label").join(format!("{}.pgm", s.name));
        pnm(p.clone(), save_pnm(&p, &s.labels))?;
        let p = root.join("sgo").join(format!("{}.pgm", s.name));
        pnm(p.clone(), save_pnm(&p, &s.sgo))?;
        let p = root.join("sgb").join(format!("{}.pgm", s.name));
        pnm(p.clone(), save_pnm(&p, &s.sgb))?;
    }
    Ok(())
}
