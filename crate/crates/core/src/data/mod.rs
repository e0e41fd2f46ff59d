//! Dataset ingestion, preprocessing, runtime augmentation, page-grid
//! cropping, and k-fold partitioning.

mod augment;
mod dataset;
mod folds;
mod page;
mod resize;

pub use augment::{
    apply_affine, apply_color_jitter, augment, augment_planes, sample_affine, sample_color,
    AffineJitter, AugmentConfig, ColorJitter,
};
pub use dataset::{decode_image, load_dataset, load_manifest, DatasetLoad, LabeledImage, LoadIssue};
pub use folds::{FoldRoles, FoldSplit};
pub use page::{crop_page_grid, PageCell};
pub use resize::{bilinear_resize_channel, resize_to_input, resize_to_planes};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset root {0} is not a readable directory")]
    BadRoot(String),
    #[error("no class directories found under {0}")]
    NoClasses(String),
    #[error("dataset is empty")]
    Empty,
    #[error("cannot split {n} samples into {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    BadFoldCount(usize),
    #[error("image has a zero dimension ({width}x{height})")]
    ZeroDimension { width: usize, height: usize },
    #[error("page of {height}x{width} cannot be cut into {rows}x{cols} cells")]
    DegeneratePage {
        height: usize,
        width: usize,
        rows: usize,
        cols: usize,
    },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    BadChannels(usize),
    #[error("manifest line {line}: {reason}")]
    BadManifest { line: usize, reason: String },
    #[error("unknown class `{0}` in manifest")]
    UnknownClass(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}
