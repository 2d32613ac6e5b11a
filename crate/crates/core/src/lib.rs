//! Segmentation training with object-consistency and boundary-preservation
//! losses driven by segmenter-generated object maps.
//!
//! Pipeline: [`mask_prep`] turns a mask archive into object (SGO) and
//! boundary (SGB) maps, [`model`] trains a small convolutional network under
//! [`losses::total_loss`], [`tiling`] stitches sliding-window predictions and
//! [`metrics`] scores the result.

pub mod config;
pub mod grids;
pub mod losses;
pub mod mask_prep;
pub mod metrics;
pub mod model;
pub mod tiling;

pub use config::{ConfigError, RunConfig};
pub use grids::{softmax, BoundaryGrid, GridError, LabelGrid, ObjectGrid, ProbGrid, RealGrid, ScoreGrid};
pub use losses::{total_loss, BoundaryParams, CompositeLoss, LossError, LossResult, LossWeights};
pub use mask_prep::{decode_archive, generate_sgo_sgb, MaskArchive, PrepError, PrepParams};
pub use metrics::{ConfusionMatrix, MetricProfile, MetricsError, MetricsReport};
pub use model::{ModelError, OptimParams, Sample, ToyFcn, TrainConfig};
pub use tiling::{tile_positions, Accumulator, Dihedral, TileBundle, TileSpec, TilingError};

use thiserror::Error;

/// Any error raised by this crate, wrapping the owning module's diagnostic.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Pnm(#[from] grids::PnmError),
    #[error(transparent)]
    Pgrd(#[from] grids::PgrdError),
    #[error(transparent)]
    Archive(#[from] mask_prep::ArchiveError),
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Tiling(#[from] TilingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] model::CheckpointError),
    #[error(transparent)]
    Dataset(#[from] model::DatasetError),
    #[error(transparent)]
    Train(#[from] model::TrainError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    InvalidArgument(String),
}
