//! Subcommand implementations. Human-readable tables go to stdout; progress
//! logs are line-delimited JSON on stderr; all files land under the
//! requested output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use bornovit::data::{
    crop_page_grid, decode_image, load_dataset, load_manifest, resize_to_planes, DataError,
    DatasetLoad,
};
use bornovit::eval::{classification_report, gradcam as compute_gradcam, EvalError};
use bornovit::model::ModelConfig;
use bornovit::profile::profile as profile_config;
use bornovit::tensor::Tensor;
use bornovit::train::{
    load_checkpoint, run_kfold, save_checkpoint, Checkpoint, EpochRecord, KFoldReport, TrainError,
};

use crate::config::RunConfig;
use crate::{CliError, CropPageArgs, EvalArgs, GradcamArgs, ProfileArgs, TrainArgs};

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn map_train_err(e: TrainError) -> CliError {
    match e {
        TrainError::BadConfig(_) | TrainError::CheckpointFormat { .. } | TrainError::Model(_) => {
            config_err(e)
        }
        other => data_err(other),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| data_err(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn load_samples(root: &Path, manifest: Option<&Path>) -> Result<DatasetLoad, CliError> {
    if !root.is_dir() {
        return Err(data_err(format!(
            "data directory {} does not exist or is not a directory",
            root.display()
        )));
    }
    let load = match manifest {
        Some(m) => load_manifest(root, m),
        None => load_dataset(root),
    }
    .map_err(data_err)?;
    for issue in &load.issues {
        log_json(&serde_json::json!({
            "event": "load_issue",
            "path": issue.path,
            "message": issue.message,
        }));
    }
    if load.samples.is_empty() {
        return Err(data_err(format!(
            "no decodable samples under {}",
            root.display()
        )));
    }
    Ok(load)
}

fn log_json(value: &serde_json::Value) {
    eprintln!("{value}");
}

#[derive(Serialize)]
struct TrainSummary {
    seed: u64,
    folds: usize,
    stratified_folds: bool,
    class_names: Vec<String>,
    model: ModelConfig,
    train: bornovit::train::TrainConfig,
    augment: bornovit::data::AugmentConfig,
    report: KFoldReport,
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_ref())?;
    let data_root = args
        .data_dir
        .or(cfg.data.root_dir.clone())
        .ok_or_else(|| config_err("no dataset: pass --data-dir or set data.root_dir"))?;
    let out_dir = args
        .out
        .or(cfg.output_dir.clone())
        .ok_or_else(|| config_err("no output directory: pass --out or set output_dir"))?;
    ensure_dir(&out_dir)?;

    let load = load_samples(&data_root, cfg.data.manifest.as_deref())?;
    let num_classes = load.class_names.len();
    if let Some(explicit) = cfg.model.num_classes {
        if explicit != num_classes {
            return Err(CliError::Semantic(format!(
                "config says {explicit} classes but the dataset has {num_classes}"
            )));
        }
    }
    let model_cfg = cfg.model.build(Some(num_classes));
    model_cfg.validate().map_err(config_err)?;
    let mut train_cfg = cfg.train.build();
    if let Some(seed) = args.seed {
        train_cfg.seed = seed;
    }
    let augment_cfg = cfg.augment.build();
    augment_cfg.validate().map_err(config_err)?;
    let k = cfg.folds.unwrap_or(5);
    let stratified = args.stratified || cfg.stratified_folds.unwrap_or(false);
    let parallel = args.parallel_folds || cfg.parallel_folds.unwrap_or(false);

    let init_ck: Option<Checkpoint> = match &args.init_checkpoint {
        Some(path) => Some(load_checkpoint(path).map_err(map_train_err)?),
        None => None,
    };

    log_json(&serde_json::json!({
        "event": "train_start",
        "samples": load.samples.len(),
        "classes": num_classes,
        "folds": k,
        "seed": train_cfg.seed,
    }));

    let on_epoch = |r: &EpochRecord| {
        log_json(&serde_json::to_value(r).expect("record serializes"));
    };
    let outcome = run_kfold(
        &model_cfg,
        &train_cfg,
        &augment_cfg,
        &load.samples,
        &load.class_names,
        k,
        stratified,
        parallel,
        init_ck.as_ref(),
        &on_epoch,
    )
    .map_err(map_train_err)?;

    for (r, ck) in outcome.checkpoints.iter().enumerate() {
        save_checkpoint(&out_dir.join(format!("fold{r}.bvit")), ck).map_err(map_train_err)?;
        let mut lines = String::new();
        for record in &outcome.fold_epochs[r] {
            lines.push_str(&serde_json::to_string(record).expect("record serializes"));
            lines.push('\n');
        }
        write_text(&out_dir.join(format!("fold{r}_metrics.jsonl")), &lines)?;
    }
    let summary = TrainSummary {
        seed: train_cfg.seed,
        folds: k,
        stratified_folds: stratified,
        class_names: load.class_names.clone(),
        model: model_cfg,
        train: train_cfg,
        augment: augment_cfg,
        report: outcome.report.clone(),
    };
    let mut summary_json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    summary_json.push('\n');
    write_text(&out_dir.join("summary.json"), &summary_json)?;

    println!("fold  test_acc  test_loss  best_epoch  epochs");
    for f in &outcome.report.folds {
        println!(
            "{:>4}  {:>8.4}  {:>9.4}  {:>10}  {:>6}",
            f.fold, f.test_accuracy, f.test_loss, f.best_epoch, f.epochs_trained
        );
    }
    println!(
        "mean test accuracy {:.4} (std {:.4})",
        outcome.report.mean_test_accuracy, outcome.report.std_test_accuracy
    );
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&args.checkpoint).map_err(map_train_err)?;
    let load = load_samples(&args.data_dir, None)?;
    let ck_classes = ck.meta.class_names.len();
    if ck_classes != load.class_names.len() {
        return Err(CliError::Semantic(format!(
            "checkpoint was trained for {ck_classes} classes but the dataset has {}; \
             retrain with `train --init-checkpoint` to adapt the head",
            load.class_names.len()
        )));
    }
    let model_cfg = ck.meta.model.clone();
    let params = ck.into_params().map_err(map_train_err)?;
    let mut inputs = Vec::with_capacity(load.samples.len());
    let mut labels = Vec::with_capacity(load.samples.len());
    for s in &load.samples {
        inputs.push(resize_to_planes(s, model_cfg.image_size).map_err(data_err)?);
        labels.push(s.label);
    }
    let (preds, loss) = bornovit::eval::predict_and_loss(
        &params,
        &model_cfg,
        &inputs,
        &labels,
        args.batch_size,
    )
    .map_err(data_err)?;
    let report = classification_report(&labels, &preds, &load.class_names);

    ensure_dir(&args.out)?;
    let mut report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    report_json.push('\n');
    write_text(&args.out.join("report.json"), &report_json)?;
    write_text(&args.out.join("confusion.csv"), &report.confusion_csv())?;

    print!("{}", report.render_text());
    println!("mean loss {loss:.4}");
    Ok(())
}

pub fn profile(args: ProfileArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_ref())?;
    let model_cfg = cfg.model.build(args.num_classes);
    let report = profile_config(&model_cfg).map_err(config_err)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print!("{}", report.render_text());
    }
    Ok(())
}

pub fn gradcam(args: GradcamArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&args.checkpoint).map_err(map_train_err)?;
    let model_cfg = ck.meta.model.clone();
    let class_names = ck.meta.class_names.clone();
    let params = ck.into_params().map_err(map_train_err)?;

    let sample = decode_image(&args.image, 0, "query")
        .map_err(|e| data_err(format!("cannot decode {}: {e}", args.image.display())))?;
    let planes = resize_to_planes(&sample, model_cfg.image_size).map_err(data_err)?;
    let image = Tensor::from_vec(
        &[3, model_cfg.image_size, model_cfg.image_size],
        planes,
    )
    .map_err(data_err)?;

    let map = compute_gradcam(&params, &model_cfg, &image, args.class).map_err(|e| match e {
        EvalError::BadTargetClass { .. } => config_err(e),
        other => data_err(other),
    })?;

    ensure_dir(&args.out)?;
    map.save_heatmap_png(&args.out.join("heatmap.png"))
        .map_err(data_err)?;
    map.save_overlay_png(&args.out.join("overlay.png"))
        .map_err(data_err)?;

    let predicted_name = class_names
        .get(map.predicted_class)
        .cloned()
        .unwrap_or_else(|| map.predicted_class.to_string());
    println!(
        "predicted class {} ({predicted_name}) with confidence {:.4}; explained class {}",
        map.predicted_class, map.confidence, map.target_class
    );
    Ok(())
}

pub fn crop_page(args: CropPageArgs) -> Result<(), CliError> {
    let page = decode_image(&args.image, 0, "page")
        .map_err(|e| data_err(format!("cannot decode {}: {e}", args.image.display())))?;
    let cells = crop_page_grid(
        &page.pixels,
        page.height,
        page.width,
        page.channels,
        args.rows,
        args.cols,
    )
    .map_err(|e| match e {
        DataError::DegeneratePage { .. } => config_err(e),
        other => data_err(other),
    })?;
    ensure_dir(&args.out_dir)?;
    for cell in &cells {
        let path = args.out_dir.join(format!("cell_{}_{}.png", cell.row, cell.col));
        let ok = match page.channels {
            1 => image::GrayImage::from_raw(cell.width as u32, cell.height as u32, cell.pixels.clone())
                .expect("cell buffer")
                .save(&path)
                .map_err(|e| e.to_string()),
            _ => image::RgbImage::from_raw(cell.width as u32, cell.height as u32, cell.pixels.clone())
                .expect("cell buffer")
                .save(&path)
                .map_err(|e| e.to_string()),
        };
        ok.map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))?;
    }
    println!(
        "wrote {} cells to {}",
        cells.len(),
        args.out_dir.display()
    );
    Ok(())
}
