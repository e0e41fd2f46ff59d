//! Training-protocol integration tests on synthetic glyph data: loss
//! descent, best-epoch restoration, determinism, and k-fold orchestration.

use bornovit::data::{AugmentConfig, FoldSplit};
use bornovit::eval::evaluate;
use bornovit::model::ModelConfig;
use bornovit::train::{run_kfold, train_fold, Checkpoint, TrainConfig};
use bornovit_testkit::glyph_dataset;

fn tiny_model() -> ModelConfig {
    ModelConfig {
        image_size: 32,
        patch_size: 8,
        embed_dim: 16,
        depth: 1,
        num_heads: 2,
        mlp_hidden_dim: 32,
        num_classes: 3,
        ..ModelConfig::default()
    }
}

fn toy_train_cfg(max_epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 16,
        max_epochs,
        patience_limit: 10,
        seed: 42,
        ..TrainConfig::default()
    }
}

fn checkpoints_bit_equal(a: &Checkpoint, b: &Checkpoint) -> bool {
    a.tensors.len() == b.tensors.len()
        && a.tensors.iter().zip(&b.tensors).all(|(x, y)| {
            x.name == y.name
                && x.dims == y.dims
                && x.values
                    .iter()
                    .zip(&y.values)
                    .all(|(u, v)| u.to_bits() == v.to_bits())
        })
}

#[test]
fn training_loss_decreases_on_toy_glyphs() {
    let (samples, class_names) = glyph_dataset(30, 224, 1);
    let split = FoldSplit::new(samples.len(), 5, 42).unwrap();
    let trained = train_fold(
        &tiny_model(),
        &toy_train_cfg(3),
        &AugmentConfig::disabled(),
        &samples,
        &split,
        0,
        &class_names,
        None,
        &|_| {},
    )
    .unwrap();
    let losses: Vec<f64> = trained.epochs.iter().map(|e| e.train_loss).collect();
    assert_eq!(losses.len(), 3);
    assert!(
        losses[0] > losses[1] && losses[1] > losses[2],
        "losses not strictly decreasing: {losses:?}"
    );
}

#[test]
fn max_epochs_one_trains_exactly_one_epoch() {
    let (samples, class_names) = glyph_dataset(10, 64, 2);
    let split = FoldSplit::new(samples.len(), 5, 0).unwrap();
    let trained = train_fold(
        &tiny_model(),
        &toy_train_cfg(1),
        &AugmentConfig::disabled(),
        &samples,
        &split,
        0,
        &class_names,
        None,
        &|_| {},
    )
    .unwrap();
    assert_eq!(trained.epochs.len(), 1);
    assert_eq!(trained.checkpoint.meta.epoch, 0);
}

#[test]
fn returned_checkpoint_is_from_the_best_validation_epoch() {
    let (samples, class_names) = glyph_dataset(20, 64, 3);
    let split = FoldSplit::new(samples.len(), 5, 7).unwrap();
    let trained = train_fold(
        &tiny_model(),
        &toy_train_cfg(6),
        &AugmentConfig::default(),
        &samples,
        &split,
        1,
        &class_names,
        None,
        &|_| {},
    )
    .unwrap();
    let argmin = trained
        .epochs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.val_loss.partial_cmp(&b.val_loss).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    assert_eq!(trained.checkpoint.meta.epoch, argmin);
    let best = &trained.epochs[argmin];
    assert_eq!(
        trained.checkpoint.meta.val_metrics.as_ref().unwrap().loss,
        best.val_loss
    );
}

#[test]
fn same_seed_trains_bit_identical_checkpoints() {
    let (samples, class_names) = glyph_dataset(12, 64, 4);
    let split = FoldSplit::new(samples.len(), 5, 11).unwrap();
    let run = || {
        train_fold(
            &tiny_model(),
            &toy_train_cfg(3),
            &AugmentConfig::default(),
            &samples,
            &split,
            0,
            &class_names,
            None,
            &|_| {},
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    assert!(checkpoints_bit_equal(&a.checkpoint, &b.checkpoint));
    assert_eq!(a.epochs, b.epochs);
}

#[test]
fn evaluation_is_repeatable_in_eval_mode() {
    let (samples, class_names) = glyph_dataset(10, 64, 5);
    let split = FoldSplit::new(samples.len(), 5, 3).unwrap();
    let cfg = tiny_model();
    let trained = train_fold(
        &cfg,
        &toy_train_cfg(2),
        &AugmentConfig::disabled(),
        &samples,
        &split,
        0,
        &class_names,
        None,
        &|_| {},
    )
    .unwrap();
    let params = trained.checkpoint.into_params().unwrap();
    let inputs: Vec<Vec<f32>> = samples
        .iter()
        .map(|s| bornovit::data::resize_to_planes(s, cfg.image_size).unwrap())
        .collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let (r1, l1) = evaluate(&params, &cfg, &inputs, &labels, &class_names, 8).unwrap();
    let (r2, l2) = evaluate(&params, &cfg, &inputs, &labels, &class_names, 8).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(l1.to_bits(), l2.to_bits());
}

#[test]
fn kfold_covers_every_sample_once_and_aggregates_means() {
    let (samples, class_names) = glyph_dataset(17, 64, 6); // 51 samples
    let outcome = run_kfold(
        &tiny_model(),
        &toy_train_cfg(2),
        &AugmentConfig::disabled(),
        &samples,
        &class_names,
        5,
        false,
        false,
        None,
        &|_| {},
    )
    .unwrap();
    assert_eq!(outcome.checkpoints.len(), 5);
    assert_eq!(outcome.report.folds.len(), 5);
    let mean = outcome
        .report
        .folds
        .iter()
        .map(|f| f.test_accuracy)
        .sum::<f64>()
        / 5.0;
    assert!((outcome.report.mean_test_accuracy - mean).abs() < 1e-12);
    for f in &outcome.report.folds {
        assert!(f.epochs_trained <= 2);
        assert!(f.best_epoch < f.epochs_trained);
    }
    // every sample tested exactly once across rotations: fold sizes sum to n
    let split = FoldSplit::new(samples.len(), 5, 42).unwrap();
    let mut tested = 0;
    for r in 0..5 {
        tested += split.role_indices(r).2.len();
    }
    assert_eq!(tested, samples.len());
}

#[test]
fn parallel_folds_match_serial_folds() {
    let (samples, class_names) = glyph_dataset(10, 64, 7);
    let run = |parallel: bool| {
        run_kfold(
            &tiny_model(),
            &toy_train_cfg(2),
            &AugmentConfig::default(),
            &samples,
            &class_names,
            5,
            false,
            parallel,
            None,
            &|_| {},
        )
        .unwrap()
    };
    let serial = run(false);
    let parallel = run(true);
    assert_eq!(serial.report, parallel.report);
    for (a, b) in serial.checkpoints.iter().zip(&parallel.checkpoints) {
        assert!(checkpoints_bit_equal(a, b));
    }
}

#[test]
fn transfer_learning_start_from_checkpoint() {
    // pretrain with 5 classes, then fine-tune the 3-class toy from it
    let pre_cfg = ModelConfig {
        num_classes: 5,
        ..tiny_model()
    };
    let pre_params = bornovit::model::init_params(&pre_cfg, 123).unwrap();
    let pre_ck = Checkpoint::from_params(
        bornovit::train::CheckpointMeta {
            model: pre_cfg,
            class_names: (0..5).map(|i| format!("p{i}")).collect(),
            normalization: bornovit::train::NORMALIZATION.into(),
            epoch: 0,
            train_metrics: None,
            val_metrics: None,
            seed: 123,
        },
        &pre_params,
    );
    let (samples, class_names) = glyph_dataset(10, 64, 8);
    let split = FoldSplit::new(samples.len(), 5, 1).unwrap();
    let trained = train_fold(
        &tiny_model(),
        &toy_train_cfg(1),
        &AugmentConfig::disabled(),
        &samples,
        &split,
        0,
        &class_names,
        Some(&pre_ck),
        &|_| {},
    )
    .unwrap();
    assert_eq!(trained.checkpoint.meta.model.num_classes, 3);
    let head = trained
        .checkpoint
        .tensors
        .iter()
        .find(|t| t.name == "head.weight")
        .unwrap();
    assert_eq!(head.dims, vec![3, 16]);
}

#[test]
fn incompatible_pretrained_backbone_is_a_config_error() {
    let other_cfg = ModelConfig {
        embed_dim: 32,
        mlp_hidden_dim: 64,
        ..tiny_model()
    };
    let params = bornovit::model::init_params(&other_cfg, 9).unwrap();
    let ck = Checkpoint::from_params(
        bornovit::train::CheckpointMeta {
            model: other_cfg,
            class_names: vec!["a".into(), "b".into(), "c".into()],
            normalization: bornovit::train::NORMALIZATION.into(),
            epoch: 0,
            train_metrics: None,
            val_metrics: None,
            seed: 9,
        },
        &params,
    );
    let (samples, class_names) = glyph_dataset(10, 64, 10);
    let split = FoldSplit::new(samples.len(), 5, 2).unwrap();
    let err = train_fold(
        &tiny_model(),
        &toy_train_cfg(1),
        &AugmentConfig::disabled(),
        &samples,
        &split,
        0,
        &class_names,
        Some(&ck),
        &|_| {},
    )
    .unwrap_err();
    assert!(err.to_string().contains("backbone"), "{err}");
}

#[test]
fn empty_train_split_is_a_config_error() {
    // k=2: rotation roles leave zero training folds
    let (samples, class_names) = glyph_dataset(4, 64, 9);
    let split = FoldSplit::new(samples.len(), 2, 0).unwrap();
    let err = train_fold(
        &tiny_model(),
        &toy_train_cfg(1),
        &AugmentConfig::disabled(),
        &samples,
        &split,
        0,
        &class_names,
        None,
        &|_| {},
    )
    .unwrap_err();
    assert!(err.to_string().contains("training split"), "{err}");
}
