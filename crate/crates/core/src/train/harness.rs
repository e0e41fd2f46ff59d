//! The training protocol: seeded epoch loop over shuffled batches, per-epoch
//! validation in eval mode, early stopping with best-snapshot restoration,
//! and k-fold orchestration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{augment_planes, resize_to_planes, AugmentConfig, FoldSplit, LabeledImage};
use crate::eval::predict_and_loss;
use crate::model::{adapt_head, forward, init_params, Mode, ModelConfig, ViTParams};
use crate::rng::{derive_seed, stream};
use crate::tensor::{cross_entropy, Tensor};

use super::checkpoint::{Checkpoint, CheckpointMeta, MetricPair};
use super::early_stop::{EarlyStopState, StopDecision};
use super::optimizer::{optimizer_step, AdamState, OptimizerConfig};
use super::TrainError;

// rng stream tags
const TAG_SHUFFLE: u64 = 1;
const TAG_AUGMENT: u64 = 2;
const TAG_DROPOUT: u64 = 3;
const TAG_INIT: u64 = 4;
const TAG_ADAPT: u64 = 5;

pub const NORMALIZATION: &str = "unit_scale_0_1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience_limit: u32,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 128,
            max_epochs: 100,
            patience_limit: 10,
            optimizer: OptimizerConfig::default(),
            seed: 42,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(TrainError::BadConfig("learning_rate must be >= 0".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience_limit == 0 {
            return Err(TrainError::BadConfig(
                "batch_size, max_epochs and patience_limit must be positive".into(),
            ));
        }
        if self.optimizer.name != "adam" {
            return Err(TrainError::BadConfig(format!(
                "unknown optimizer `{}` (supported: adam)",
                self.optimizer.name
            )));
        }
        Ok(())
    }
}

/// One line of the per-epoch metric log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub fold: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub bad_epochs: u32,
}

#[derive(Debug)]
pub struct FoldTraining {
    pub checkpoint: Checkpoint,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub best_epoch: usize,
    pub epochs_trained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    pub folds: Vec<FoldResult>,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
}

#[derive(Debug)]
pub struct KFoldOutcome {
    pub checkpoints: Vec<Checkpoint>,
    pub fold_epochs: Vec<Vec<EpochRecord>>,
    pub report: KFoldReport,
}

fn starting_params(
    model_cfg: &ModelConfig,
    seed: u64,
    rotation: usize,
    init_from: Option<&Checkpoint>,
) -> Result<ViTParams, TrainError> {
    match init_from {
        None => Ok(init_params(
            model_cfg,
            derive_seed(seed, &[TAG_INIT, rotation as u64]),
        )?),
        Some(ck) => {
            let backbone_of = |c: &ModelConfig| ModelConfig {
                num_classes: 1,
                dropout_p: 0.0,
                ..c.clone()
            };
            if backbone_of(&ck.meta.model) != backbone_of(model_cfg) {
                return Err(TrainError::BadConfig(format!(
                    "pretrained checkpoint backbone {:?} does not match the requested model {:?}; \
                     only the head may differ",
                    ck.meta.model, model_cfg
                )));
            }
            let pretrained = ck.into_params()?;
            if pretrained.num_classes() == model_cfg.num_classes {
                Ok(pretrained)
            } else {
                Ok(adapt_head(
                    &pretrained,
                    model_cfg.num_classes,
                    derive_seed(seed, &[TAG_ADAPT, rotation as u64]),
                )?)
            }
        }
    }
}

/// Train one fold rotation. Per epoch: seeded shuffle, batches of
/// `batch_size` (final partial batch included) with fresh augmentation per
/// sample, one optimizer step per batch, then validation in eval mode. The
/// returned checkpoint is the snapshot from the best-validation epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_fold(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    augment_cfg: &AugmentConfig,
    samples: &[LabeledImage],
    split: &FoldSplit,
    rotation: usize,
    class_names: &[String],
    init_from: Option<&Checkpoint>,
    on_epoch: &(dyn Fn(&EpochRecord) + Sync),
) -> Result<FoldTraining, TrainError> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    let (train_idx, val_idx, _) = split.role_indices(rotation);
    if train_idx.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }
    if val_idx.is_empty() {
        return Err(TrainError::BadConfig("validation split is empty".into()));
    }
    let size = model_cfg.image_size;
    let seed = train_cfg.seed;

    // resize once; augmentation happens on top of the resized planes
    let mut resized: Vec<Option<Vec<f32>>> = vec![None; samples.len()];
    for &i in train_idx.iter().chain(&val_idx) {
        resized[i] = Some(resize_to_planes(&samples[i], size)?);
    }
    let val_inputs: Vec<Vec<f32>> = val_idx
        .iter()
        .map(|&i| resized[i].clone().expect("resized above"))
        .collect();
    let val_labels: Vec<usize> = val_idx.iter().map(|&i| samples[i].label).collect();

    let mut params = starting_params(model_cfg, seed, rotation, init_from)?;
    let mut adam = AdamState::new(&params);
    let mut stopper = EarlyStopState::new();
    let mut records: Vec<EpochRecord> = Vec::new();

    for epoch in 0..train_cfg.max_epochs {
        let mut order = train_idx.clone();
        {
            use rand::seq::SliceRandom;
            order.shuffle(&mut stream(
                seed,
                &[TAG_SHUFFLE, rotation as u64, epoch as u64],
            ));
        }

        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for (batch_idx, batch) in order.chunks(train_cfg.batch_size).enumerate() {
            let mut data = Vec::with_capacity(batch.len() * 3 * size * size);
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let planes = resized[i].as_ref().expect("resized above");
                let mut rng = stream(
                    seed,
                    &[TAG_AUGMENT, rotation as u64, epoch as u64, i as u64],
                );
                data.extend(augment_planes(planes, size, augment_cfg, &mut rng));
                labels.push(samples[i].label);
            }
            let input = Tensor::from_vec(&[batch.len(), 3, size, size], data)?;
            let mut dropout_rng = stream(
                seed,
                &[TAG_DROPOUT, rotation as u64, epoch as u64, batch_idx as u64],
            );
            let out = forward(
                &params,
                model_cfg,
                &input,
                Mode::Train,
                Some(&mut dropout_rng),
                false,
            )?;
            let loss = cross_entropy(&out.logits, &labels)?;
            let loss_value = f64::from(loss.item());
            if !loss_value.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    context: format!("training batch {batch_idx}"),
                });
            }
            loss_sum += loss_value * batch.len() as f64;
            correct += out
                .logits
                .argmax_rows()
                .iter()
                .zip(&labels)
                .filter(|(p, l)| p == l)
                .count();
            loss.backward()?;
            params = optimizer_step(&params, &mut adam, train_cfg)?;
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let train_accuracy = correct as f64 / train_idx.len() as f64;

        let (val_preds, val_loss) = predict_and_loss(
            &params,
            model_cfg,
            &val_inputs,
            &val_labels,
            train_cfg.batch_size,
        )?;
        let val_accuracy = val_preds
            .iter()
            .zip(&val_labels)
            .filter(|(p, l)| p == l)
            .count() as f64
            / val_labels.len() as f64;

        let decision = stopper.update(epoch, val_loss, &params, train_cfg.patience_limit)?;
        let record = EpochRecord {
            fold: rotation,
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
            bad_epochs: stopper.consecutive_bad_epochs,
        };
        on_epoch(&record);
        records.push(record);
        if decision == StopDecision::Stop {
            break;
        }
    }

    let best_epoch = stopper.best_epoch;
    let best_params = stopper
        .best_params
        .take()
        .expect("at least one epoch ran");
    let best_record = &records[best_epoch];
    let meta = CheckpointMeta {
        model: model_cfg.clone(),
        class_names: class_names.to_vec(),
        normalization: NORMALIZATION.into(),
        epoch: best_epoch,
        train_metrics: Some(MetricPair {
            loss: best_record.train_loss,
            accuracy: best_record.train_accuracy,
        }),
        val_metrics: Some(MetricPair {
            loss: best_record.val_loss,
            accuracy: best_record.val_accuracy,
        }),
        seed,
    };
    Ok(FoldTraining {
        checkpoint: Checkpoint::from_params(meta, &best_params),
        epochs: records,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_one_rotation(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    augment_cfg: &AugmentConfig,
    samples: &[LabeledImage],
    split: &FoldSplit,
    rotation: usize,
    class_names: &[String],
    init_from: Option<&Checkpoint>,
    on_epoch: &(dyn Fn(&EpochRecord) + Sync),
) -> Result<(Checkpoint, Vec<EpochRecord>, FoldResult), TrainError> {
    let trained = train_fold(
        model_cfg,
        train_cfg,
        augment_cfg,
        samples,
        split,
        rotation,
        class_names,
        init_from,
        on_epoch,
    )?;
    // evaluate the best snapshot once on the held-out test fold
    let (_, _, test_idx) = split.role_indices(rotation);
    let test_inputs: Vec<Vec<f32>> = test_idx
        .iter()
        .map(|&i| resize_to_planes(&samples[i], model_cfg.image_size))
        .collect::<Result<_, _>>()?;
    let test_labels: Vec<usize> = test_idx.iter().map(|&i| samples[i].label).collect();
    let params = trained.checkpoint.into_params()?;
    let (preds, test_loss) = predict_and_loss(
        &params,
        model_cfg,
        &test_inputs,
        &test_labels,
        train_cfg.batch_size,
    )?;
    let test_accuracy = preds
        .iter()
        .zip(&test_labels)
        .filter(|(p, l)| p == l)
        .count() as f64
        / test_labels.len() as f64;
    let result = FoldResult {
        fold: rotation,
        test_accuracy,
        test_loss,
        best_epoch: trained.checkpoint.meta.epoch,
        epochs_trained: trained.epochs.len(),
    };
    Ok((trained.checkpoint, trained.epochs, result))
}

/// Run all `k` rotations: train on k-2 folds, early-stop on the validation
/// fold, evaluate the best snapshot once on the test fold. The aggregate is
/// the mean and population standard deviation of the test accuracies.
#[allow(clippy::too_many_arguments)]
pub fn run_kfold(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    augment_cfg: &AugmentConfig,
    samples: &[LabeledImage],
    class_names: &[String],
    k: usize,
    stratified: bool,
    parallel: bool,
    init_from: Option<&Checkpoint>,
    on_epoch: &(dyn Fn(&EpochRecord) + Sync),
) -> Result<KFoldOutcome, TrainError> {
    let split = if stratified {
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        FoldSplit::stratified(&labels, k, train_cfg.seed)?
    } else {
        FoldSplit::new(samples.len(), k, train_cfg.seed)?
    };

    let run = |rotation: usize| {
        run_one_rotation(
            model_cfg,
            train_cfg,
            augment_cfg,
            samples,
            &split,
            rotation,
            class_names,
            init_from,
            on_epoch,
        )
    };
    let results: Vec<(Checkpoint, Vec<EpochRecord>, FoldResult)> = if parallel {
        (0..k)
            .into_par_iter()
            .map(run)
            .collect::<Result<Vec<_>, _>>()?
    } else {
        (0..k).map(run).collect::<Result<Vec<_>, _>>()?
    };

    let mut checkpoints = Vec::with_capacity(k);
    let mut fold_epochs = Vec::with_capacity(k);
    let mut folds = Vec::with_capacity(k);
    for (ck, epochs, result) in results {
        checkpoints.push(ck);
        fold_epochs.push(epochs);
        folds.push(result);
    }
    let accs: Vec<f64> = folds.iter().map(|f| f.test_accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64;
    Ok(KFoldOutcome {
        checkpoints,
        fold_epochs,
        report: KFoldReport {
            folds,
            mean_test_accuracy: mean,
            std_test_accuracy: var.sqrt(),
        },
    })
}
