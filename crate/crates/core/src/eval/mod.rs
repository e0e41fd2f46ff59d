//! Evaluation outputs: classification metrics and gradient-weighted
//! attention maps.

mod colormap;
mod gradcam;
mod metrics;

pub use colormap::heat_color;
pub use gradcam::{
    cam_from_tokens, gradcam, normalize_map, overlay_rgb, save_rgb_png, GradCamMap,
};
pub use metrics::{
    classification_report, evaluate, predict_and_loss, ClassMetrics, ClassificationReport,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty sample set")]
    EmptySampleSet,
    #[error("model parameters contain non-finite values ({0})")]
    NonFiniteParams(String),
    #[error("target class {class} out of range for {classes} classes")]
    BadTargetClass { class: usize, classes: usize },
    #[error("image error on {path}: {reason}")]
    Image { path: String, reason: String },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}
