//! Independent f64 reference implementation of the model forward pass and
//! cross-entropy loss, written with naive loops and no shared code with the
//! engine. Used as the oracle for finite-difference gradient checks and
//! forward-agreement tests.

use std::collections::BTreeMap;

use bornovit::model::{ModelConfig, ViTParams};

const LN_EPS: f64 = 1e-6;

#[derive(Clone)]
pub struct RefViT {
    pub cfg: ModelConfig,
    pub tensors: BTreeMap<String, Vec<f64>>,
}

impl RefViT {
    pub fn from_params(cfg: &ModelConfig, params: &ViTParams) -> RefViT {
        let tensors = params
            .named_tensors()
            .into_iter()
            .map(|(name, t)| (name, t.data().iter().map(|&v| f64::from(v)).collect()))
            .collect();
        RefViT {
            cfg: cfg.clone(),
            tensors,
        }
    }

    pub fn tensor(&self, name: &str) -> &[f64] {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing tensor {name}"))
    }

    pub fn tensor_mut(&mut self, name: &str) -> &mut Vec<f64> {
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("missing tensor {name}"))
    }

    fn layer_norm(&self, x: &mut [f64], d: usize, gamma: &[f64], beta: &[f64]) {
        for row in x.chunks_mut(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let istd = 1.0 / (var + LN_EPS).sqrt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = gamma[j] * (*v - mean) * istd + beta[j];
            }
        }
    }

    /// Logits for one image given as `[3 * S * S]` channel planes.
    pub fn logits(&self, image: &[f64]) -> Vec<f64> {
        let cfg = &self.cfg;
        let (size, p, d) = (cfg.image_size, cfg.patch_size, cfg.embed_dim);
        let side = cfg.grid_side();
        let n = cfg.num_patches();
        let t = n + 1;
        let heads = cfg.num_heads;
        let hd = d / heads;
        let hidden = cfg.mlp_hidden_dim;

        let pw = self.tensor("patch_embed.weight");
        let pb = self.tensor("patch_embed.bias");
        let cls = self.tensor("cls_token");
        let pos = self.tensor("pos_embedding");

        // tokens = [cls; patches] + pos
        let mut x = vec![0.0f64; t * d];
        for j in 0..d {
            x[j] = cls[j] + pos[j];
        }
        for py in 0..side {
            for px in 0..side {
                let tok = 1 + py * side + px;
                for oc in 0..d {
                    let mut acc = pb[oc];
                    for c in 0..cfg.in_channels {
                        for y in 0..p {
                            for xk in 0..p {
                                let iv =
                                    image[c * size * size + (py * p + y) * size + px * p + xk];
                                let wv = pw[((oc * cfg.in_channels + c) * p + y) * p + xk];
                                acc += iv * wv;
                            }
                        }
                    }
                    x[tok * d + oc] = acc + pos[tok * d + oc];
                }
            }
        }

        for b in 0..cfg.depth {
            let g1 = self.tensor(&format!("blocks.{b}.ln1.gamma")).to_vec();
            let b1 = self.tensor(&format!("blocks.{b}.ln1.beta")).to_vec();
            let qkv_w = self.tensor(&format!("blocks.{b}.attn.qkv.weight"));
            let out_w = self.tensor(&format!("blocks.{b}.attn.out.weight"));
            let out_b = self.tensor(&format!("blocks.{b}.attn.out.bias")).to_vec();

            let mut normed = x.clone();
            self.layer_norm(&mut normed, d, &g1, &b1);

            // qkv[tok][r] = sum_j normed[tok][j] * W[r][j]
            let mut qkv = vec![0.0f64; t * 3 * d];
            for tok in 0..t {
                let row = &normed[tok * d..(tok + 1) * d];
                for r in 0..3 * d {
                    let w_row = &qkv_w[r * d..(r + 1) * d];
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc += row[j] * w_row[j];
                    }
                    qkv[tok * 3 * d + r] = acc;
                }
            }

            let scale = 1.0 / (hd as f64).sqrt();
            let mut ctx = vec![0.0f64; t * d];
            for h in 0..heads {
                let q_off = h * hd;
                let k_off = d + h * hd;
                let v_off = 2 * d + h * hd;
                for ti in 0..t {
                    let q = &qkv[ti * 3 * d + q_off..ti * 3 * d + q_off + hd];
                    let mut scores = vec![0.0f64; t];
                    for (u, s) in scores.iter_mut().enumerate() {
                        let k = &qkv[u * 3 * d + k_off..u * 3 * d + k_off + hd];
                        let mut acc = 0.0;
                        for j in 0..hd {
                            acc += q[j] * k[j];
                        }
                        *s = acc * scale;
                    }
                    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for s in scores.iter_mut() {
                        *s = (*s - max).exp();
                        sum += *s;
                    }
                    for s in scores.iter_mut() {
                        *s /= sum;
                    }
                    for (u, &a) in scores.iter().enumerate() {
                        let v = &qkv[u * 3 * d + v_off..u * 3 * d + v_off + hd];
                        for j in 0..hd {
                            ctx[ti * d + h * hd + j] += a * v[j];
                        }
                    }
                }
            }

            for tok in 0..t {
                let row = &ctx[tok * d..(tok + 1) * d];
                for r in 0..d {
                    let w_row = &out_w[r * d..(r + 1) * d];
                    let mut acc = out_b[r];
                    for j in 0..d {
                        acc += row[j] * w_row[j];
                    }
                    x[tok * d + r] += acc;
                }
            }

            let g2 = self.tensor(&format!("blocks.{b}.ln2.gamma")).to_vec();
            let b2 = self.tensor(&format!("blocks.{b}.ln2.beta")).to_vec();
            let fc1_w = self.tensor(&format!("blocks.{b}.mlp.fc1.weight"));
            let fc1_b = self.tensor(&format!("blocks.{b}.mlp.fc1.bias"));
            let fc2_w = self.tensor(&format!("blocks.{b}.mlp.fc2.weight"));
            let fc2_b = self.tensor(&format!("blocks.{b}.mlp.fc2.bias"));

            let mut normed = x.clone();
            self.layer_norm(&mut normed, d, &g2, &b2);
            for tok in 0..t {
                let row = &normed[tok * d..(tok + 1) * d];
                let mut h1 = vec![0.0f64; hidden];
                for (r, out) in h1.iter_mut().enumerate() {
                    let w_row = &fc1_w[r * d..(r + 1) * d];
                    let mut acc = fc1_b[r];
                    for j in 0..d {
                        acc += row[j] * w_row[j];
                    }
                    *out = gelu64(acc);
                }
                for r in 0..d {
                    let w_row = &fc2_w[r * hidden..(r + 1) * hidden];
                    let mut acc = fc2_b[r];
                    for j in 0..hidden {
                        acc += h1[j] * w_row[j];
                    }
                    x[tok * d + r] += acc;
                }
            }
        }

        let gf = self.tensor("final_ln.gamma").to_vec();
        let bf = self.tensor("final_ln.beta").to_vec();
        self.layer_norm(&mut x, d, &gf, &bf);

        let head_w = self.tensor("head.weight");
        let head_b = self.tensor("head.bias");
        let cls_out = &x[..d];
        (0..cfg.num_classes)
            .map(|r| {
                let w_row = &head_w[r * d..(r + 1) * d];
                let mut acc = head_b[r];
                for j in 0..d {
                    acc += cls_out[j] * w_row[j];
                }
                acc
            })
            .collect()
    }

    /// Mean cross-entropy over a batch of images.
    pub fn ce_loss(&self, images: &[Vec<f64>], labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for (image, &label) in images.iter().zip(labels) {
            let logits = self.logits(image);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - logits[label];
        }
        total / images.len() as f64
    }
}

pub fn gelu64(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x * x * x)).tanh())
}
