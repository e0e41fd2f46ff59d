use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Layer-norm variance epsilon used everywhere in the model.
pub const LN_EPS: f32 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("missing parameter tensor `{0}`")]
    MissingTensor(String),
    #[error("parameter `{name}` has shape {actual:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}

/// Architecture hyperparameters. Defaults are the published configuration:
/// 224px input, 16px patches, embed 128, 4 blocks of 2 heads, MLP hidden 256.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub in_channels: usize,
    pub embed_dim: usize,
    pub depth: usize,
    pub num_heads: usize,
    pub mlp_hidden_dim: usize,
    pub num_classes: usize,
    pub dropout_p: f32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            image_size: 224,
            patch_size: 16,
            in_channels: 3,
            embed_dim: 128,
            depth: 4,
            num_heads: 2,
            mlp_hidden_dim: 256,
            num_classes: 10,
            dropout_p: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::InvalidConfig(m));
        if self.image_size == 0 || self.patch_size == 0 {
            return err("image_size and patch_size must be positive".into());
        }
        if !self.image_size.is_multiple_of(self.patch_size) {
            return err(format!(
                "image_size {} not divisible by patch_size {}",
                self.image_size, self.patch_size
            ));
        }
        if self.in_channels == 0 || self.embed_dim == 0 || self.mlp_hidden_dim == 0 {
            return err("channel and embedding dimensions must be positive".into());
        }
        if self.num_heads == 0 || !self.embed_dim.is_multiple_of(self.num_heads) {
            return err(format!(
                "embed_dim {} not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            ));
        }
        if self.num_classes == 0 {
            return err("num_classes must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return err(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        Ok(())
    }

    /// Patches per side of the image grid.
    pub fn grid_side(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn num_patches(&self) -> usize {
        self.grid_side() * self.grid_side()
    }

    /// Token count including the classification token.
    pub fn seq_len(&self) -> usize {
        self.num_patches() + 1
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    /// Flattened patch length (channels * patch²), the input width of the
    /// patch projection.
    pub fn patch_dim(&self) -> usize {
        self.in_channels * self.patch_size * self.patch_size
    }
}
