//! Parameter containers, initialization, and head adaptation.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::stream;
use crate::tensor::Tensor;

use super::config::{ModelConfig, ModelError};

/// Standard deviation of the truncated-normal draws for the CLS token and
/// positional table, clipped at two standard deviations.
const EMBED_INIT_STD: f64 = 0.02;

#[derive(Clone, Debug)]
pub struct BlockParams {
    pub ln1_gamma: Tensor,
    pub ln1_beta: Tensor,
    /// Stacked query/key/value projection `[3*embed, embed]`, no bias.
    pub qkv_weight: Tensor,
    /// Attention output projection `[embed, embed]` plus bias. The bias is
    /// what closes the published per-block count of 132,096: 256 + 49,152 +
    /// (16,384 + 128) + 256 + 33,024 + 32,896.
    pub out_weight: Tensor,
    pub out_bias: Tensor,
    pub ln2_gamma: Tensor,
    pub ln2_beta: Tensor,
    pub fc1_weight: Tensor,
    pub fc1_bias: Tensor,
    pub fc2_weight: Tensor,
    pub fc2_bias: Tensor,
}

/// Every learnable tensor of the model, in one place.
#[derive(Clone, Debug)]
pub struct ViTParams {
    /// Patch projection `[embed, channels, patch, patch]` plus bias.
    pub patch_weight: Tensor,
    pub patch_bias: Tensor,
    pub cls_token: Tensor,
    /// `[1, num_patches + 1, embed]`, covering the CLS position.
    pub pos_embedding: Tensor,
    pub blocks: Vec<BlockParams>,
    pub final_ln_gamma: Tensor,
    pub final_ln_beta: Tensor,
    pub head_weight: Tensor,
    pub head_bias: Tensor,
}

impl ViTParams {
    /// All tensors with their canonical names, in a fixed order. This order
    /// is the checkpoint layout and the optimizer-state index.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("patch_embed.weight".into(), &self.patch_weight),
            ("patch_embed.bias".into(), &self.patch_bias),
            ("cls_token".into(), &self.cls_token),
            ("pos_embedding".into(), &self.pos_embedding),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("blocks.{i}.ln1.gamma"), &b.ln1_gamma));
            out.push((format!("blocks.{i}.ln1.beta"), &b.ln1_beta));
            out.push((format!("blocks.{i}.attn.qkv.weight"), &b.qkv_weight));
            out.push((format!("blocks.{i}.attn.out.weight"), &b.out_weight));
            out.push((format!("blocks.{i}.attn.out.bias"), &b.out_bias));
            out.push((format!("blocks.{i}.ln2.gamma"), &b.ln2_gamma));
            out.push((format!("blocks.{i}.ln2.beta"), &b.ln2_beta));
            out.push((format!("blocks.{i}.mlp.fc1.weight"), &b.fc1_weight));
            out.push((format!("blocks.{i}.mlp.fc1.bias"), &b.fc1_bias));
            out.push((format!("blocks.{i}.mlp.fc2.weight"), &b.fc2_weight));
            out.push((format!("blocks.{i}.mlp.fc2.bias"), &b.fc2_bias));
        }
        out.push(("final_ln.gamma".into(), &self.final_ln_gamma));
        out.push(("final_ln.beta".into(), &self.final_ln_beta));
        out.push(("head.weight".into(), &self.head_weight));
        out.push(("head.bias".into(), &self.head_bias));
        out
    }

    pub fn param_count(&self) -> u64 {
        self.named_tensors()
            .iter()
            .map(|(_, t)| t.numel() as u64)
            .sum()
    }

    /// Number of output classes the head was built for.
    pub fn num_classes(&self) -> usize {
        self.head_weight.shape()[0]
    }

    /// Clear accumulated gradients on every tensor.
    pub fn zero_grads(&self) {
        for (_, t) in self.named_tensors() {
            t.zero_grad();
        }
    }

    /// Rebuild from `(name, shape, data)` triples, validating names and
    /// shapes against the config.
    pub fn from_named(
        config: &ModelConfig,
        mut tensors: HashMap<String, (Vec<usize>, Vec<f32>)>,
    ) -> Result<ViTParams, ModelError> {
        config.validate()?;
        let mut take = |name: &str, expected: &[usize]| -> Result<Tensor, ModelError> {
            let (shape, data) = tensors
                .remove(name)
                .ok_or_else(|| ModelError::MissingTensor(name.to_string()))?;
            if shape != expected {
                return Err(ModelError::TensorShape {
                    name: name.to_string(),
                    expected: expected.to_vec(),
                    actual: shape,
                });
            }
            Ok(Tensor::param(&shape, data)?)
        };
        let d = config.embed_dim;
        let h = config.mlp_hidden_dim;
        let params = ViTParams {
            patch_weight: take(
                "patch_embed.weight",
                &[d, config.in_channels, config.patch_size, config.patch_size],
            )?,
            patch_bias: take("patch_embed.bias", &[d])?,
            cls_token: take("cls_token", &[1, 1, d])?,
            pos_embedding: take("pos_embedding", &[1, config.seq_len(), d])?,
            blocks: (0..config.depth)
                .map(|i| {
                    Ok(BlockParams {
                        ln1_gamma: take(&format!("blocks.{i}.ln1.gamma"), &[d])?,
                        ln1_beta: take(&format!("blocks.{i}.ln1.beta"), &[d])?,
                        qkv_weight: take(&format!("blocks.{i}.attn.qkv.weight"), &[3 * d, d])?,
                        out_weight: take(&format!("blocks.{i}.attn.out.weight"), &[d, d])?,
                        out_bias: take(&format!("blocks.{i}.attn.out.bias"), &[d])?,
                        ln2_gamma: take(&format!("blocks.{i}.ln2.gamma"), &[d])?,
                        ln2_beta: take(&format!("blocks.{i}.ln2.beta"), &[d])?,
                        fc1_weight: take(&format!("blocks.{i}.mlp.fc1.weight"), &[h, d])?,
                        fc1_bias: take(&format!("blocks.{i}.mlp.fc1.bias"), &[h])?,
                        fc2_weight: take(&format!("blocks.{i}.mlp.fc2.weight"), &[d, h])?,
                        fc2_bias: take(&format!("blocks.{i}.mlp.fc2.bias"), &[d])?,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?,
            final_ln_gamma: take("final_ln.gamma", &[d])?,
            final_ln_beta: take("final_ln.beta", &[d])?,
            head_weight: take("head.weight", &[config.num_classes, d])?,
            head_bias: take("head.bias", &[config.num_classes])?,
        };
        Ok(params)
    }
}

fn trunc_normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    let dist = Normal::new(0.0, EMBED_INIT_STD).expect("valid normal");
    let clip = 2.0 * EMBED_INIT_STD;
    (0..n)
        .map(|_| loop {
            let v: f64 = dist.sample(rng);
            if v.abs() <= clip {
                break v as f32;
            }
        })
        .collect()
}

fn glorot_uniform(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f32> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n)
        .map(|_| rng.random_range(-bound..bound) as f32)
        .collect()
}

fn glorot_param(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let n = shape.iter().product();
    Tensor::param(shape, glorot_uniform(rng, fan_in, fan_out, n)).expect("valid param shape")
}

fn zeros_param(shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::param(shape, vec![0.0; n]).expect("valid param shape")
}

fn ones_param(shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::param(shape, vec![1.0; n]).expect("valid param shape")
}

fn init_head(rng: &mut ChaCha8Rng, embed_dim: usize, num_classes: usize) -> (Tensor, Tensor) {
    let w = glorot_param(rng, &[num_classes, embed_dim], embed_dim, num_classes);
    let b = zeros_param(&[num_classes]);
    (w, b)
}

/// Fresh parameters, deterministic for a fixed seed. Embedding tables draw
/// from a truncated normal; projection weights are Glorot-uniform (the patch
/// projection treated as the linear map it is equivalent to); biases and
/// layer-norm betas start at zero, layer-norm gammas at one.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ViTParams, ModelError> {
    config.validate()?;
    let mut rng = stream(seed, &[0x696e6974]);
    let d = config.embed_dim;
    let h = config.mlp_hidden_dim;
    let pd = config.patch_dim();

    let patch_weight = glorot_param(
        &mut rng,
        &[d, config.in_channels, config.patch_size, config.patch_size],
        pd,
        d,
    );
    let patch_bias = zeros_param(&[d]);
    let cls_token = Tensor::param(&[1, 1, d], trunc_normal(&mut rng, d)).expect("cls shape");
    let pos_embedding = Tensor::param(
        &[1, config.seq_len(), d],
        trunc_normal(&mut rng, config.seq_len() * d),
    )
    .expect("pos shape");

    let blocks = (0..config.depth)
        .map(|_| BlockParams {
            ln1_gamma: ones_param(&[d]),
            ln1_beta: zeros_param(&[d]),
            qkv_weight: glorot_param(&mut rng, &[3 * d, d], d, 3 * d),
            out_weight: glorot_param(&mut rng, &[d, d], d, d),
            out_bias: zeros_param(&[d]),
            ln2_gamma: ones_param(&[d]),
            ln2_beta: zeros_param(&[d]),
            fc1_weight: glorot_param(&mut rng, &[h, d], d, h),
            fc1_bias: zeros_param(&[h]),
            fc2_weight: glorot_param(&mut rng, &[d, h], h, d),
            fc2_bias: zeros_param(&[d]),
        })
        .collect();

    let (head_weight, head_bias) = init_head(&mut rng, d, config.num_classes);
    Ok(ViTParams {
        patch_weight,
        patch_bias,
        cls_token,
        pos_embedding,
        blocks,
        final_ln_gamma: ones_param(&[d]),
        final_ln_beta: zeros_param(&[d]),
        head_weight,
        head_bias,
    })
}

/// Transfer-learning head swap: every backbone tensor is carried over
/// bit-exactly (the buffers are shared) and only the classification head is
/// re-initialized for the new label set.
pub fn adapt_head(
    params: &ViTParams,
    new_num_classes: usize,
    seed: u64,
) -> Result<ViTParams, ModelError> {
    if new_num_classes < 1 {
        return Err(ModelError::InvalidConfig(
            "adapt_head needs at least one class".into(),
        ));
    }
    let embed_dim = params.head_weight.shape()[1];
    let mut rng = stream(seed, &[0x68656164]);
    let (head_weight, head_bias) = init_head(&mut rng, embed_dim, new_num_classes);
    Ok(ViTParams {
        head_weight,
        head_bias,
        ..params.clone()
    })
}
