//! The forward pass: patch embedding, pre-norm transformer blocks, and the
//! classification head, with optional activation tracing for explanations.

use rand_chacha::ChaCha8Rng;

use crate::tensor::{Tensor, TensorError};

use super::config::{ModelConfig, ModelError, LN_EPS};
use super::params::{BlockParams, ViTParams};

/// Whether stochastic layers (dropout) are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-block activations kept alive for explanation passes.
///
/// `attention` holds the softmaxed attention weights `[B, heads, T, T]` as
/// plain values; `block_outputs` holds the live post-residual token
/// activations `[B, T, embed]`, so a later backward pass deposits gradients
/// on them.
pub struct AttentionTrace {
    pub attention: Vec<Tensor>,
    pub block_outputs: Vec<Tensor>,
}

pub struct ForwardOutput {
    pub logits: Tensor,
    pub trace: Option<AttentionTrace>,
}

/// `x · Wᵀ (+ b)` for a weight stored `[out, in]`.
fn linear(x: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor, TensorError> {
    let y = x.matmul(&weight.transpose_last2()?)?;
    match bias {
        Some(b) => y.add(b),
        None => Ok(y),
    }
}

/// Rearrange `[B, C, S, S]` image data into rows of flattened patches
/// `[B * N, C * P * P]`, top-left patch first, each row laid out
/// channel-major to match the projection weight.
fn im2row(images: &Tensor, cfg: &ModelConfig) -> Result<Tensor, TensorError> {
    let s = images.shape();
    let expected = [
        s.first().copied().unwrap_or(0),
        cfg.in_channels,
        cfg.image_size,
        cfg.image_size,
    ];
    if s.len() != 4 || s[1..] != expected[1..] {
        return Err(TensorError::ShapeMismatch {
            op: "patch_embed",
            left: s.to_vec(),
            right: expected.to_vec(),
        });
    }
    let (batch, chans, size, p) = (s[0], cfg.in_channels, cfg.image_size, cfg.patch_size);
    let side = cfg.grid_side();
    let src = images.data();
    let mut rows = Vec::with_capacity(batch * cfg.num_patches() * cfg.patch_dim());
    for b in 0..batch {
        for py in 0..side {
            for px in 0..side {
                for c in 0..chans {
                    let plane = (b * chans + c) * size * size;
                    for y in 0..p {
                        let row_base = plane + (py * p + y) * size + px * p;
                        rows.extend_from_slice(&src[row_base..row_base + p]);
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[batch * cfg.num_patches(), cfg.patch_dim()], rows)
}

/// Project an image batch to patch tokens `[B, N, embed]`. Equivalent to a
/// stride-P convolution with the stored `[embed, C, P, P]` kernel.
pub fn patch_embed(
    params: &ViTParams,
    cfg: &ModelConfig,
    images: &Tensor,
) -> Result<Tensor, ModelError> {
    let batch = images.shape()[0];
    let patches = im2row(images, cfg)?;
    let weight = params
        .patch_weight
        .reshape(&[cfg.embed_dim, cfg.patch_dim()])?;
    let tokens = linear(&patches, &weight, Some(&params.patch_bias))?;
    Ok(tokens.reshape(&[batch, cfg.num_patches(), cfg.embed_dim])?)
}

struct BlockRun {
    output: Tensor,
    attention: Tensor,
}

fn attention(
    x: &Tensor,
    block: &BlockParams,
    cfg: &ModelConfig,
) -> Result<(Tensor, Tensor), TensorError> {
    let (batch, tokens, d) = (x.shape()[0], x.shape()[1], cfg.embed_dim);
    let hd = cfg.head_dim();
    let qkv = linear(&x.reshape(&[batch * tokens, d])?, &block.qkv_weight, None)?
        .reshape(&[batch, tokens, 3 * d])?;
    let q = qkv.slice(2, 0, d)?;
    let k = qkv.slice(2, d, d)?;
    let v = qkv.slice(2, 2 * d, d)?;

    let scale = 1.0 / (hd as f32).sqrt();
    let mut contexts = Vec::with_capacity(cfg.num_heads);
    let mut weights = Vec::with_capacity(cfg.num_heads);
    for h in 0..cfg.num_heads {
        let qh = q.slice(2, h * hd, hd)?;
        let kh = k.slice(2, h * hd, hd)?;
        let vh = v.slice(2, h * hd, hd)?;
        let scores = qh.matmul(&kh.transpose_last2()?)?.scale(scale);
        let attn = scores.softmax_last();
        contexts.push(attn.matmul(&vh)?);
        weights.push(attn);
    }
    let ctx_refs: Vec<&Tensor> = contexts.iter().collect();
    let ctx = Tensor::concat(&ctx_refs, 2)?;
    let out = linear(
        &ctx.reshape(&[batch * tokens, d])?,
        &block.out_weight,
        Some(&block.out_bias),
    )?
    .reshape(&[batch, tokens, d])?;

    // stack per-head weights into one [B, heads, T, T] value buffer
    let mut stacked = Vec::with_capacity(batch * cfg.num_heads * tokens * tokens);
    for b in 0..batch {
        for w in &weights {
            let data = w.data();
            stacked.extend_from_slice(&data[b * tokens * tokens..(b + 1) * tokens * tokens]);
        }
    }
    let attn_weights = Tensor::from_vec(&[batch, cfg.num_heads, tokens, tokens], stacked)?;
    Ok((out, attn_weights))
}

fn block_forward(
    x: &Tensor,
    block: &BlockParams,
    cfg: &ModelConfig,
    mode: Mode,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<BlockRun, TensorError> {
    let normed = x.layer_norm(&block.ln1_gamma, &block.ln1_beta, LN_EPS)?;
    let (attn_out, attn_weights) = attention(&normed, block, cfg)?;
    let x = x.add(&attn_out)?;

    let normed = x.layer_norm(&block.ln2_gamma, &block.ln2_beta, LN_EPS)?;
    let (batch, tokens, d) = (x.shape()[0], x.shape()[1], cfg.embed_dim);
    let flat = normed.reshape(&[batch * tokens, d])?;
    let mut hidden = linear(&flat, &block.fc1_weight, Some(&block.fc1_bias))?.gelu();
    let train = mode == Mode::Train;
    if let Some(rng) = rng {
        hidden = hidden.dropout(cfg.dropout_p, train, rng)?;
        let mut mlp = linear(&hidden, &block.fc2_weight, Some(&block.fc2_bias))?;
        mlp = mlp.dropout(cfg.dropout_p, train, rng)?;
        let output = x.add(&mlp.reshape(&[batch, tokens, d])?)?;
        return Ok(BlockRun {
            output,
            attention: attn_weights,
        });
    }
    let mlp = linear(&hidden, &block.fc2_weight, Some(&block.fc2_bias))?;
    let output = x.add(&mlp.reshape(&[batch, tokens, d])?)?;
    Ok(BlockRun {
        output,
        attention: attn_weights,
    })
}

/// Run the model on an image batch `[B, C, S, S]`.
///
/// Train mode needs an RNG for dropout; eval mode is a pure function of the
/// parameters and input. With `trace` set, per-block attention weights and
/// output activations are returned alongside the logits.
pub fn forward(
    params: &ViTParams,
    cfg: &ModelConfig,
    images: &Tensor,
    mode: Mode,
    mut rng: Option<&mut ChaCha8Rng>,
    trace: bool,
) -> Result<ForwardOutput, ModelError> {
    if mode == Mode::Train && cfg.dropout_p > 0.0 && rng.is_none() {
        return Err(ModelError::InvalidConfig(
            "train-mode forward with dropout needs an RNG".into(),
        ));
    }
    let batch = images.shape()[0];
    let patches = patch_embed(params, cfg, images)?;
    let cls = params.cls_token.repeat_axis0(batch)?;
    let mut x = Tensor::concat(&[&cls, &patches], 1)?;
    x = x.add(&params.pos_embedding)?;
    if let Some(rng) = rng.as_deref_mut() {
        x = x.dropout(cfg.dropout_p, mode == Mode::Train, rng)?;
    }

    let mut traced = trace.then(|| AttentionTrace {
        attention: Vec::with_capacity(cfg.depth),
        block_outputs: Vec::with_capacity(cfg.depth),
    });
    for block in &params.blocks {
        let run = block_forward(&x, block, cfg, mode, rng.as_deref_mut())?;
        x = run.output;
        if let Some(t) = traced.as_mut() {
            t.attention.push(run.attention);
            t.block_outputs.push(x.clone());
        }
    }

    let x = x.layer_norm(&params.final_ln_gamma, &params.final_ln_beta, LN_EPS)?;
    let cls_out = x.slice(1, 0, 1)?.reshape(&[batch, cfg.embed_dim])?;
    let logits = linear(&cls_out, &params.head_weight, Some(&params.head_bias))?;
    Ok(ForwardOutput {
        logits,
        trace: traced,
    })
}
