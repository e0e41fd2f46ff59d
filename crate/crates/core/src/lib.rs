//! Training, inference, and profiling engine for a 0.65M-parameter vision
//! transformer aimed at handwritten-character classification on small
//! hardware.
//!
//! The crate is self-contained: a minimal reverse-mode autodiff tensor core,
//! the model itself, an image-folder data pipeline with runtime
//! augmentation, a k-fold training harness with early stopping and binary
//! checkpoints, classification metrics, gradient-weighted attention maps,
//! and a static parameter/MAC profiler.

pub mod data;
pub mod eval;
pub mod model;
pub mod profile;
pub mod rng;
pub mod tensor;
pub mod train;

pub use data::{AugmentConfig, DataError, FoldSplit, LabeledImage};
pub use eval::{ClassificationReport, EvalError, GradCamMap};
pub use model::{ModelConfig, ModelError, ViTParams};
pub use profile::ProfileReport;
pub use tensor::{Tensor, TensorError};
pub use train::{Checkpoint, EarlyStopState, TrainConfig, TrainError};
