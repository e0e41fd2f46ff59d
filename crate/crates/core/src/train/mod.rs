//! The training protocol: optimizer, epoch loop with early stopping, k-fold
//! orchestration, and checkpoint persistence.

mod checkpoint;
mod early_stop;
mod harness;
mod optimizer;

pub use checkpoint::{
    load_checkpoint, parse_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint,
    Checkpoint, CheckpointMeta, MetricPair, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use early_stop::{EarlyStopState, StopDecision};
pub use harness::{
    run_kfold, train_fold, EpochRecord, FoldResult, FoldTraining, KFoldOutcome, KFoldReport,
    TrainConfig, NORMALIZATION,
};
pub use optimizer::{optimizer_step, AdamState, OptimizerConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("no gradient recorded for parameter `{0}`")]
    MissingGradient(String),
    #[error("non-finite loss at epoch {epoch} ({context}); aborting training")]
    NonFiniteLoss { epoch: usize, context: String },
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("checkpoint format error at byte {offset}: {reason}")]
    CheckpointFormat { offset: u64, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}
