//! Gradient-weighted class activation maps over the last transformer
//! block's output tokens.
//!
//! The target logit is backpropagated to the final block's token
//! activations; per-channel weights are the gradient means over the patch
//! tokens (CLS dropped); the weighted, ReLU-rectified activations form the
//! patch-grid map, which is bilinearly upsampled to the input resolution and
//! min-max normalized.

use std::path::Path;

use crate::data::bilinear_resize_channel;
use crate::model::{forward, Mode, ModelConfig, ViTParams};
use crate::tensor::Tensor;

use super::colormap::heat_color;
use super::EvalError;

pub struct GradCamMap {
    /// Side length of the patch grid (image_size / patch_size).
    pub grid_side: usize,
    /// Non-negative weighted activations, `grid_side²`, pre-normalization.
    pub raw_grid: Vec<f32>,
    /// Upsampled map in [0, 1], `image_size²`; max is exactly 1 whenever the
    /// raw grid is nonzero.
    pub upsampled: Vec<f32>,
    pub image_size: usize,
    pub target_class: usize,
    pub predicted_class: usize,
    /// Softmax probability of the predicted class.
    pub confidence: f32,
    /// RGB8 blend: 0.5 * heat colormap + 0.5 * input image.
    pub overlay: Vec<u8>,
}

/// Core map computation, exposed so synthetic activations/gradients can
/// drive it directly: channel weights are gradient means over tokens, the
/// map is ReLU(sum_ch weight * activation) per token.
pub fn cam_from_tokens(
    activations: &[f32],
    gradients: &[f32],
    tokens: usize,
    channels: usize,
) -> Vec<f32> {
    assert_eq!(activations.len(), tokens * channels);
    assert_eq!(gradients.len(), tokens * channels);
    let mut weights = vec![0.0f32; channels];
    for t in 0..tokens {
        for c in 0..channels {
            weights[c] += gradients[t * channels + c];
        }
    }
    for w in weights.iter_mut() {
        *w /= tokens as f32;
    }
    (0..tokens)
        .map(|t| {
            let mut acc = 0.0f32;
            for c in 0..channels {
                acc += weights[c] * activations[t * channels + c];
            }
            acc.max(0.0)
        })
        .collect()
}

/// Min-max normalize to [0, 1]; an all-zero map stays zero, and a constant
/// positive map saturates to 1.
pub fn normalize_map(values: &[f32]) -> Vec<f32> {
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let min = values.iter().copied().fold(f32::INFINITY, f32::min);
    if max <= 0.0 {
        return vec![0.0; values.len()];
    }
    let range = max - min;
    if range == 0.0 {
        return vec![1.0; values.len()];
    }
    values.iter().map(|v| (v - min) / range).collect()
}

/// Blend the heat colormap of `upsampled` with the input image (channel
/// planes in [0, 1]) at equal weight.
pub fn overlay_rgb(upsampled: &[f32], image_planes: &[f32], size: usize) -> Vec<u8> {
    let n = size * size;
    debug_assert_eq!(upsampled.len(), n);
    debug_assert_eq!(image_planes.len(), 3 * n);
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let heat = heat_color(upsampled[i]);
        for c in 0..3 {
            let img = image_planes[c * n + i].clamp(0.0, 1.0) * 255.0;
            out.push((0.5 * heat[c] as f32 + 0.5 * img).round() as u8);
        }
    }
    out
}

/// Compute the map for one image (`[3, S, S]` values in [0, 1]). With no
/// explicit target the predicted class is explained.
pub fn gradcam(
    params: &ViTParams,
    cfg: &ModelConfig,
    image: &Tensor,
    target_class: Option<usize>,
) -> Result<GradCamMap, EvalError> {
    for (name, t) in params.named_tensors() {
        if t.data().iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFiniteParams(name));
        }
    }
    if let Some(t) = target_class {
        if t >= cfg.num_classes {
            return Err(EvalError::BadTargetClass {
                class: t,
                classes: cfg.num_classes,
            });
        }
    }
    let size = cfg.image_size;
    let batch = image.reshape(&[1, 3, size, size])?;
    let out = forward(params, cfg, &batch, Mode::Eval, None, true)?;
    let trace = out.trace.expect("trace requested");
    let logits = out.logits;

    let probs = logits.softmax_last();
    let predicted = logits.argmax_rows()[0];
    let target = target_class.unwrap_or(predicted);
    let confidence = probs.data()[predicted];

    // d(target logit)/d(last block tokens)
    let target_logit = logits.slice(1, target, 1)?.reshape(&[1])?;
    target_logit.backward()?;

    let last = trace
        .block_outputs
        .last()
        .ok_or_else(|| EvalError::NonFiniteParams("model has no blocks".into()))?;
    let grads = last
        .grad()
        .expect("backward populated the traced block output");
    let acts = last.data();

    let tokens = cfg.num_patches();
    let d = cfg.embed_dim;
    // drop the CLS token (position 0)
    let acts_patches = &acts[d..(tokens + 1) * d];
    let grads_patches = &grads[d..(tokens + 1) * d];
    let raw_grid = cam_from_tokens(acts_patches, grads_patches, tokens, d);

    let side = cfg.grid_side();
    let upsampled = normalize_map(&bilinear_resize_channel(&raw_grid, side, side, size, size));
    let overlay = overlay_rgb(&upsampled, image.data(), size);
    Ok(GradCamMap {
        grid_side: side,
        raw_grid,
        upsampled,
        image_size: size,
        target_class: target,
        predicted_class: predicted,
        confidence,
        overlay,
    })
}

impl GradCamMap {
    /// Heatmap alone as an RGB8 buffer.
    pub fn heatmap_rgb(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.upsampled.len() * 3);
        for &v in &self.upsampled {
            out.extend_from_slice(&heat_color(v));
        }
        out
    }

    pub fn save_heatmap_png(&self, path: &Path) -> Result<(), EvalError> {
        save_rgb_png(path, &self.heatmap_rgb(), self.image_size)
    }

    pub fn save_overlay_png(&self, path: &Path) -> Result<(), EvalError> {
        save_rgb_png(path, &self.overlay, self.image_size)
    }
}

pub fn save_rgb_png(path: &Path, rgb: &[u8], size: usize) -> Result<(), EvalError> {
    let img: image::RgbImage =
        image::ImageBuffer::from_raw(size as u32, size as u32, rgb.to_vec())
            .expect("buffer matches dimensions");
    img.save(path).map_err(|e| EvalError::Image {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}
