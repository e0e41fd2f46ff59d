//! The JSON run configuration: every field optional with the published
//! defaults, unknown keys rejected so hyperparameter typos cannot pass
//! silently.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bornovit::data::AugmentConfig;
use bornovit::model::ModelConfig;
use bornovit::train::{OptimizerConfig, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub image_size: Option<usize>,
    pub patch_size: Option<usize>,
    pub in_channels: Option<usize>,
    pub embed_dim: Option<usize>,
    pub depth: Option<usize>,
    pub num_heads: Option<usize>,
    pub mlp_hidden_dim: Option<usize>,
    /// Omitted: inferred from the dataset when training, 10 for profiling.
    pub num_classes: Option<usize>,
    pub dropout_p: Option<f32>,
}

impl ModelSection {
    pub fn build(&self, num_classes: Option<usize>) -> ModelConfig {
        let d = ModelConfig::default();
        ModelConfig {
            image_size: self.image_size.unwrap_or(d.image_size),
            patch_size: self.patch_size.unwrap_or(d.patch_size),
            in_channels: self.in_channels.unwrap_or(d.in_channels),
            embed_dim: self.embed_dim.unwrap_or(d.embed_dim),
            depth: self.depth.unwrap_or(d.depth),
            num_heads: self.num_heads.unwrap_or(d.num_heads),
            mlp_hidden_dim: self.mlp_hidden_dim.unwrap_or(d.mlp_hidden_dim),
            num_classes: num_classes.or(self.num_classes).unwrap_or(d.num_classes),
            dropout_p: self.dropout_p.unwrap_or(d.dropout_p),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub name: Option<String>,
    pub beta1: Option<f32>,
    pub beta2: Option<f32>,
    pub eps: Option<f32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: Option<f32>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience_limit: Option<u32>,
    pub optimizer: OptimizerSection,
    pub seed: Option<u64>,
    pub deterministic: Option<bool>,
}

impl TrainSection {
    pub fn build(&self) -> TrainConfig {
        let d = TrainConfig::default();
        let od = OptimizerConfig::default();
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            patience_limit: self.patience_limit.unwrap_or(d.patience_limit),
            optimizer: OptimizerConfig {
                name: self.optimizer.name.clone().unwrap_or(od.name),
                beta1: self.optimizer.beta1.unwrap_or(od.beta1),
                beta2: self.optimizer.beta2.unwrap_or(od.beta2),
                eps: self.optimizer.eps.unwrap_or(od.eps),
            },
            seed: self.seed.unwrap_or(d.seed),
            deterministic: self.deterministic.unwrap_or(d.deterministic),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub enabled: Option<bool>,
    pub translate_frac: Option<f32>,
    pub shear_deg: Option<f32>,
    pub brightness: Option<f32>,
    pub contrast: Option<f32>,
    pub saturation: Option<f32>,
    pub hue: Option<f32>,
}

impl AugmentSection {
    pub fn build(&self) -> AugmentConfig {
        let d = AugmentConfig::default();
        AugmentConfig {
            enabled: self.enabled.unwrap_or(d.enabled),
            translate_frac: self.translate_frac.unwrap_or(d.translate_frac),
            shear_deg: self.shear_deg.unwrap_or(d.shear_deg),
            brightness: self.brightness.unwrap_or(d.brightness),
            contrast: self.contrast.unwrap_or(d.contrast),
            saturation: self.saturation.unwrap_or(d.saturation),
            hue: self.hue.unwrap_or(d.hue),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub root_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub train: TrainSection,
    pub augment: AugmentSection,
    pub data: DataSection,
    pub output_dir: Option<PathBuf>,
    pub folds: Option<usize>,
    pub stratified_folds: Option<bool>,
    pub parallel_folds: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("config {}: {e}", path.display()))
        })
    }
}
