//! The vision-transformer model: configuration, parameters, initialization,
//! forward pass, and transfer-learning head adaptation.

mod config;
mod forward;
mod params;

pub use config::{ModelConfig, ModelError, LN_EPS};
pub use forward::{forward, patch_embed, AttentionTrace, ForwardOutput, Mode};
pub use params::{adapt_head, init_params, BlockParams, ViTParams};
