//! Static model accounting: per-layer parameter counts, multiply-accumulate
//! totals, and serialized sizes, plus a cross-check that walks a concrete
//! parameter set and compares it against the closed forms.

use serde::{Deserialize, Serialize};

use crate::model::{ModelConfig, ModelError, ViTParams};

const BYTES_PER_MIB: f64 = 1024.0 * 1024.0;

/// One table row, shapes rendered with a symbolic batch dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerRow {
    pub name: String,
    pub description: String,
    pub input_shape: String,
    pub output_shape: String,
    pub params: u64,
    /// Human form, e.g. "49,152 (QKV), 16,384 (O)".
    pub params_display: String,
}

/// Closed-form per-layer parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCounts {
    pub patch_embedding: u64,
    pub positional_embedding: u64,
    pub cls_token: u64,
    pub per_block: u64,
    pub final_layer_norm: u64,
    pub head: u64,
    pub total: u64,
}

/// Closed-form sub-layer counts within one transformer block. The output
/// projection carries its bias (weight + embed), which is what makes the
/// block total come out at 132,096 for the default configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCounts {
    pub ln1: u64,
    pub qkv: u64,
    pub out_weight: u64,
    pub out_bias: u64,
    pub ln2: u64,
    pub fc1: u64,
    pub fc2: u64,
    pub total: u64,
}

/// Analytic multiply-accumulate counts at batch size 1. Elementwise work
/// (layer norm, GELU, softmax, residuals) is excluded, matching the common
/// profiler convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacBreakdown {
    pub patch_embedding: u64,
    pub qkv_per_block: u64,
    pub attention_scores_per_block: u64,
    pub out_proj_per_block: u64,
    pub mlp_per_block: u64,
    pub per_block: u64,
    pub head: u64,
    pub total: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileReport {
    pub config: ModelConfig,
    pub rows: Vec<LayerRow>,
    pub block_rows: Vec<LayerRow>,
    pub layer_counts: LayerCounts,
    pub block_counts: BlockCounts,
    pub macs: MacBreakdown,
    pub total_params: u64,
    pub total_macs: u64,
    /// Strict floating-point operations: one multiply plus one add per MAC.
    pub total_flops: u64,
    pub size_fp32_bytes: u64,
    pub size_int8_bytes: u64,
    pub size_fp32_mib: f64,
    pub size_int8_mib: f64,
    pub notes: Vec<String>,
}

/// A disagreement between the closed-form report and a concrete model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountMismatch {
    pub layer: String,
    pub expected: u64,
    pub actual: u64,
}

pub fn layer_counts(cfg: &ModelConfig) -> LayerCounts {
    let d = cfg.embed_dim as u64;
    let c = cfg.num_classes as u64;
    let patch = cfg.patch_dim() as u64 * d + d;
    let pos = cfg.seq_len() as u64 * d;
    let cls = d;
    let per_block = block_counts(cfg).total;
    let final_ln = 2 * d;
    let head = d * c + c;
    let total = patch + pos + cls + cfg.depth as u64 * per_block + final_ln + head;
    LayerCounts {
        patch_embedding: patch,
        positional_embedding: pos,
        cls_token: cls,
        per_block,
        final_layer_norm: final_ln,
        head,
        total,
    }
}

pub fn block_counts(cfg: &ModelConfig) -> BlockCounts {
    let d = cfg.embed_dim as u64;
    let h = cfg.mlp_hidden_dim as u64;
    let ln = 2 * d;
    let qkv = 3 * d * d;
    let out_weight = d * d;
    let out_bias = d;
    let fc1 = d * h + h;
    let fc2 = h * d + d;
    BlockCounts {
        ln1: ln,
        qkv,
        out_weight,
        out_bias,
        ln2: ln,
        fc1,
        fc2,
        total: ln + qkv + out_weight + out_bias + ln + fc1 + fc2,
    }
}

/// Multiply-accumulate count for one forward pass at batch size 1.
pub fn count_macs(cfg: &ModelConfig) -> MacBreakdown {
    let n = cfg.num_patches() as u64;
    let t = cfg.seq_len() as u64;
    let d = cfg.embed_dim as u64;
    let h = cfg.mlp_hidden_dim as u64;
    let heads = cfg.num_heads as u64;
    let hd = cfg.head_dim() as u64;
    let patch = n * d * cfg.patch_dim() as u64;
    let qkv = t * d * 3 * d;
    // QKᵀ plus the weighted value sum, per head
    let scores = 2 * heads * t * t * hd;
    let out_proj = t * d * d;
    let mlp = 2 * t * d * h;
    let per_block = qkv + scores + out_proj + mlp;
    let head = d * cfg.num_classes as u64;
    MacBreakdown {
        patch_embedding: patch,
        qkv_per_block: qkv,
        attention_scores_per_block: scores,
        out_proj_per_block: out_proj,
        mlp_per_block: mlp,
        per_block,
        head,
        total: patch + cfg.depth as u64 * per_block + head,
    }
}

fn group_digits(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn shape_str(dims: &[String]) -> String {
    format!("({})", dims.join(", "))
}

/// Full accounting for a configuration: the layer table, block breakdown,
/// MAC totals, and both size conventions.
pub fn profile(cfg: &ModelConfig) -> Result<ProfileReport, ModelError> {
    cfg.validate()?;
    let lc = layer_counts(cfg);
    let bc = block_counts(cfg);
    let macs = count_macs(cfg);
    let s = |v: usize| v.to_string();
    let b = "B".to_string();
    let d = cfg.embed_dim;
    let t = cfg.seq_len();

    let img = shape_str(&[b.clone(), s(cfg.in_channels), s(cfg.image_size), s(cfg.image_size)]);
    let tok = shape_str(&[b.clone(), s(t), s(d)]);
    let rows = vec![
        LayerRow {
            name: "PatchEmbedding".into(),
            description: "Conv2D layer to split image into patches and project them to embedding dimension".into(),
            input_shape: img,
            output_shape: shape_str(&[b.clone(), s(cfg.num_patches()), s(d)]),
            params: lc.patch_embedding,
            params_display: group_digits(lc.patch_embedding),
        },
        LayerRow {
            name: "Positional Embedding".into(),
            description: "Learnable positional embedding added to the input patches".into(),
            input_shape: tok.clone(),
            output_shape: tok.clone(),
            params: lc.positional_embedding,
            params_display: group_digits(lc.positional_embedding),
        },
        LayerRow {
            name: "CLS Token".into(),
            description: "Learnable CLS token for classification".into(),
            input_shape: shape_str(&["1".into(), "1".into(), s(d)]),
            output_shape: shape_str(&[b.clone(), "1".into(), s(d)]),
            params: lc.cls_token,
            params_display: group_digits(lc.cls_token),
        },
        LayerRow {
            name: "Dropout".into(),
            description: "Dropout applied to the patch and position embeddings".into(),
            input_shape: tok.clone(),
            output_shape: tok.clone(),
            params: 0,
            params_display: "0".into(),
        },
        LayerRow {
            name: format!("Transformer Blocks (x{})", cfg.depth),
            description: format!("Sequence of {} Transformer blocks", cfg.depth),
            input_shape: tok.clone(),
            output_shape: tok.clone(),
            params: cfg.depth as u64 * lc.per_block,
            params_display: format!("{}x{}", cfg.depth, group_digits(lc.per_block)),
        },
        LayerRow {
            name: "LayerNorm".into(),
            description: "Normalize embeddings".into(),
            input_shape: tok.clone(),
            output_shape: tok.clone(),
            params: lc.final_layer_norm,
            params_display: group_digits(lc.final_layer_norm),
        },
        LayerRow {
            name: "Linear (Classification)".into(),
            description: "Final linear layer to classify based on CLS token".into(),
            input_shape: shape_str(&[b.clone(), s(d)]),
            output_shape: shape_str(&[b.clone(), s(cfg.num_classes)]),
            params: lc.head,
            params_display: group_digits(lc.head),
        },
    ];

    let block_rows = vec![
        LayerRow {
            name: "LayerNorm 1".into(),
            description: "Layer normalization".into(),
            input_shape: tok.clone(),
            output_shape: tok.clone(),
            params: bc.ln1,
            params_display: group_digits(bc.ln1),
        },
        LayerRow {
            name: "Multi-Head Attention".into(),
            description: format!(
                "Self-attention mechanism with {} attention heads",
                cfg.num_heads
            ),
            input_shape: tok.clone(),
            output_shape: tok.clone(),
            params: bc.qkv + bc.out_weight + bc.out_bias,
            params_display: format!(
                "{} (QKV), {} (O), {} (O bias)",
                group_digits(bc.qkv),
                group_digits(bc.out_weight),
                group_digits(bc.out_bias)
            ),
        },
        LayerRow {
            name: "LayerNorm 2".into(),
            description: "Layer normalization".into(),
            input_shape: tok.clone(),
            output_shape: tok.clone(),
            params: bc.ln2,
            params_display: group_digits(bc.ln2),
        },
        LayerRow {
            name: "MLP".into(),
            description: "Two linear layers with GELU and dropout".into(),
            input_shape: tok.clone(),
            output_shape: tok,
            params: bc.fc1 + bc.fc2,
            params_display: format!(
                "{} (fc1), {} (fc2)",
                group_digits(bc.fc1),
                group_digits(bc.fc2)
            ),
        },
    ];

    let total_params = lc.total;
    let size_fp32 = 4 * total_params;
    let size_int8 = total_params;
    Ok(ProfileReport {
        config: cfg.clone(),
        rows,
        block_rows,
        layer_counts: lc,
        block_counts: bc,
        macs,
        total_params,
        total_macs: macs.total,
        total_flops: 2 * macs.total,
        size_fp32_bytes: size_fp32,
        size_int8_bytes: size_int8,
        size_fp32_mib: size_fp32 as f64 / BYTES_PER_MIB,
        size_int8_mib: size_int8 as f64 / BYTES_PER_MIB,
        notes: vec![
            "MAC count covers matrix products only; layer norm, GELU, softmax and residual adds are excluded.".into(),
            "FLOPs reported as 2 x MACs (one multiply plus one add).".into(),
            "int8 size assumes one byte per parameter; fp32 size four bytes per parameter.".into(),
        ],
    })
}

/// Walk every concrete tensor of `params` and cross-check the closed-form
/// report. Any disagreement is returned as a structured failure.
pub fn verify_against_model(
    params: &ViTParams,
    report: &ProfileReport,
) -> Result<(), Vec<CountMismatch>> {
    let mut actual: Vec<(String, u64)> = Vec::new();
    let numel = |name: &str| -> u64 {
        params
            .named_tensors()
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.numel() as u64)
            .unwrap_or(0)
    };

    let lc = &report.layer_counts;
    let bc = &report.block_counts;
    actual.push((
        "patch_embedding".into(),
        numel("patch_embed.weight") + numel("patch_embed.bias"),
    ));
    actual.push(("positional_embedding".into(), numel("pos_embedding")));
    actual.push(("cls_token".into(), numel("cls_token")));
    let expected_layer: Vec<(String, u64)> = vec![
        ("patch_embedding".into(), lc.patch_embedding),
        ("positional_embedding".into(), lc.positional_embedding),
        ("cls_token".into(), lc.cls_token),
    ];

    let mut mismatches: Vec<CountMismatch> = Vec::new();
    for ((layer, act), (_, exp)) in actual.iter().zip(&expected_layer) {
        if act != exp {
            mismatches.push(CountMismatch {
                layer: layer.clone(),
                expected: *exp,
                actual: *act,
            });
        }
    }

    for (i, _) in params.blocks.iter().enumerate() {
        let checks = [
            (format!("blocks.{i}.ln1"), bc.ln1, numel(&format!("blocks.{i}.ln1.gamma")) + numel(&format!("blocks.{i}.ln1.beta"))),
            (format!("blocks.{i}.attn.qkv"), bc.qkv, numel(&format!("blocks.{i}.attn.qkv.weight"))),
            (format!("blocks.{i}.attn.out"), bc.out_weight + bc.out_bias, numel(&format!("blocks.{i}.attn.out.weight")) + numel(&format!("blocks.{i}.attn.out.bias"))),
            (format!("blocks.{i}.ln2"), bc.ln2, numel(&format!("blocks.{i}.ln2.gamma")) + numel(&format!("blocks.{i}.ln2.beta"))),
            (format!("blocks.{i}.mlp.fc1"), bc.fc1, numel(&format!("blocks.{i}.mlp.fc1.weight")) + numel(&format!("blocks.{i}.mlp.fc1.bias"))),
            (format!("blocks.{i}.mlp.fc2"), bc.fc2, numel(&format!("blocks.{i}.mlp.fc2.weight")) + numel(&format!("blocks.{i}.mlp.fc2.bias"))),
        ];
        for (layer, expected, actual) in checks {
            if expected != actual {
                mismatches.push(CountMismatch {
                    layer,
                    expected,
                    actual,
                });
            }
        }
    }
    if params.blocks.len() != report.config.depth {
        mismatches.push(CountMismatch {
            layer: "blocks".into(),
            expected: report.config.depth as u64,
            actual: params.blocks.len() as u64,
        });
    }

    let final_ln = numel("final_ln.gamma") + numel("final_ln.beta");
    if final_ln != lc.final_layer_norm {
        mismatches.push(CountMismatch {
            layer: "final_layer_norm".into(),
            expected: lc.final_layer_norm,
            actual: final_ln,
        });
    }
    let head = numel("head.weight") + numel("head.bias");
    if head != lc.head {
        mismatches.push(CountMismatch {
            layer: "head".into(),
            expected: lc.head,
            actual: head,
        });
    }
    let total = params.param_count();
    if total != lc.total {
        mismatches.push(CountMismatch {
            layer: "total".into(),
            expected: lc.total,
            actual: total,
        });
    }

    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(mismatches)
    }
}

impl ProfileReport {
    /// Aligned plain-text rendering: the layer table, the per-block
    /// breakdown, and the efficiency summary.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("Layer-wise breakdown\n");
        out.push_str(&render_rows(&self.rows));
        out.push_str(&format!(
            "Total parameters: {}\n\n",
            group_digits(self.total_params)
        ));
        out.push_str("Transformer block breakdown\n");
        out.push_str(&render_rows(&self.block_rows));
        out.push_str(&format!(
            "Block total: {}\n\n",
            group_digits(self.block_counts.total)
        ));
        out.push_str(&format!(
            "MACs (batch 1): {} ({:.3} GMACs)\n",
            group_digits(self.total_macs),
            self.total_macs as f64 / 1e9
        ));
        out.push_str(&format!(
            "FLOPs (2 x MACs): {} ({:.3} GFLOPs)\n",
            group_digits(self.total_flops),
            self.total_flops as f64 / 1e9
        ));
        out.push_str(&format!(
            "Model size: {:.2} MiB at int8 (1 byte/param), {:.2} MiB at fp32\n",
            self.size_int8_mib, self.size_fp32_mib
        ));
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

fn render_rows(rows: &[LayerRow]) -> String {
    let headers = ["Layer", "Input Shape", "Output Shape", "Parameters"];
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in rows {
        widths[0] = widths[0].max(r.name.len());
        widths[1] = widths[1].max(r.input_shape.len());
        widths[2] = widths[2].max(r.output_shape.len());
        widths[3] = widths[3].max(r.params_display.len());
    }
    let mut out = String::new();
    out.push_str(&format!(
        "{:<w0$}  {:<w1$}  {:<w2$}  {:<w3$}\n",
        headers[0],
        headers[1],
        headers[2],
        headers[3],
        w0 = widths[0],
        w1 = widths[1],
        w2 = widths[2],
        w3 = widths[3],
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<w0$}  {:<w1$}  {:<w2$}  {:<w3$}\n",
            r.name,
            r.input_shape,
            r.output_shape,
            r.params_display,
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3],
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn default_cfg() -> ModelConfig {
        ModelConfig::default()
    }

    #[test]
    fn default_layer_counts_are_exact() {
        let lc = layer_counts(&default_cfg());
        assert_eq!(lc.patch_embedding, 98_432);
        assert_eq!(lc.positional_embedding, 25_216);
        assert_eq!(lc.cls_token, 128);
        assert_eq!(lc.per_block, 132_096);
        assert_eq!(lc.final_layer_norm, 256);
        assert_eq!(lc.head, 1_290);
        assert_eq!(lc.total, 653_706);
    }

    #[test]
    fn default_block_counts_are_exact() {
        let bc = block_counts(&default_cfg());
        assert_eq!(
            (bc.ln1, bc.qkv, bc.out_weight, bc.out_bias, bc.ln2, bc.fc1, bc.fc2),
            (256, 49_152, 16_384, 128, 256, 33_024, 32_896)
        );
        assert_eq!(bc.total, 132_096);
    }

    #[test]
    fn zero_depth_degenerate_count() {
        let cfg = ModelConfig {
            depth: 0,
            ..default_cfg()
        };
        assert_eq!(layer_counts(&cfg).total, 125_322);
    }

    #[test]
    fn default_mac_total() {
        let macs = count_macs(&default_cfg());
        assert_eq!(macs.patch_embedding, 19_267_584);
        assert_eq!(macs.per_block, 35_756_288);
        assert_eq!(macs.total, 162_294_016);
    }

    #[test]
    fn macs_linear_in_depth() {
        let base = count_macs(&default_cfg()).total;
        let deeper = count_macs(&ModelConfig {
            depth: 8,
            ..default_cfg()
        })
        .total;
        assert_eq!(deeper - base, 4 * 35_756_288);
    }

    #[test]
    fn sizes_match_conventions() {
        let report = profile(&default_cfg()).unwrap();
        assert_eq!(report.size_int8_bytes, 653_706);
        assert_eq!(report.size_fp32_bytes, 2_614_824);
        assert!((report.size_int8_mib - 0.62).abs() < 0.01);
    }

    #[test]
    fn verify_passes_on_fresh_model() {
        let cfg = default_cfg();
        let params = init_params(&cfg, 0).unwrap();
        let report = profile(&cfg).unwrap();
        assert!(verify_against_model(&params, &report).is_ok());
        assert_eq!(params.param_count(), 653_706);
    }

    #[test]
    fn verify_names_adapted_head() {
        let cfg = default_cfg();
        let params = init_params(&cfg, 0).unwrap();
        let adapted = crate::model::adapt_head(&params, 84, 1).unwrap();
        let report = profile(&cfg).unwrap();
        let mismatches = verify_against_model(&adapted, &report).unwrap_err();
        assert!(mismatches.iter().any(|m| m.layer == "head"));
    }

    #[test]
    fn closed_form_matches_enumeration_across_sweep() {
        let mut checked = 0;
        for &embed in &[32usize, 64, 128] {
            for depth in 1..=4usize {
                for &heads in &[1usize, 2, 4] {
                    let cfg = ModelConfig {
                        image_size: 32,
                        patch_size: 8,
                        embed_dim: embed,
                        depth,
                        num_heads: heads,
                        mlp_hidden_dim: 2 * embed,
                        num_classes: 5,
                        ..default_cfg()
                    };
                    let params = init_params(&cfg, 7).unwrap();
                    let report = profile(&cfg).unwrap();
                    assert!(
                        verify_against_model(&params, &report).is_ok(),
                        "sweep config {cfg:?}"
                    );
                    assert_eq!(params.param_count(), report.total_params);
                    checked += 1;
                }
            }
        }
        assert!(checked >= 20);
    }

    #[test]
    fn render_text_contains_key_figures() {
        let report = profile(&default_cfg()).unwrap();
        let text = report.render_text();
        assert!(text.contains("653,706"));
        assert!(text.contains("49,152 (QKV), 16,384 (O)"));
        assert!(text.contains("0.62 MiB"));
    }
}
