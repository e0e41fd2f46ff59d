//! Adaptive-moment parameter updates with bias correction.

use serde::{Deserialize, Serialize};

use crate::model::ViTParams;
use crate::tensor::Tensor;

use super::{TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub name: String,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            name: "adam".into(),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter tensor, indexed by the
/// canonical tensor order.
pub struct AdamState {
    step: u64,
    moments: Vec<(Vec<f32>, Vec<f32>)>,
}

impl AdamState {
    pub fn new(params: &ViTParams) -> AdamState {
        AdamState {
            step: 0,
            moments: params
                .named_tensors()
                .iter()
                .map(|(_, t)| (vec![0.0; t.numel()], vec![0.0; t.numel()]))
                .collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One update. Reads the gradient accumulated on every parameter tensor and
/// returns fresh parameter tensors; the inputs are left untouched, so
/// earlier snapshots stay valid.
pub fn optimizer_step(
    params: &ViTParams,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<ViTParams, TrainError> {
    state.step += 1;
    let t = state.step;
    let b1 = cfg.optimizer.beta1;
    let b2 = cfg.optimizer.beta2;
    let eps = cfg.optimizer.eps;
    let bias1 = 1.0 - b1.powi(t as i32);
    let bias2 = 1.0 - b2.powi(t as i32);

    let named = params.named_tensors();
    assert_eq!(named.len(), state.moments.len(), "optimizer state mismatch");
    let mut updated: Vec<Tensor> = Vec::with_capacity(named.len());
    for ((name, tensor), (m, v)) in named.iter().zip(state.moments.iter_mut()) {
        let grad = tensor
            .grad()
            .ok_or_else(|| TrainError::MissingGradient(name.clone()))?;
        let mut data = tensor.data().to_vec();
        for i in 0..data.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            data[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
        updated.push(Tensor::param(tensor.shape(), data).expect("same shape"));
    }
    Ok(rebuild(params, updated))
}

fn rebuild(template: &ViTParams, mut tensors: Vec<Tensor>) -> ViTParams {
    // consume in reverse so we can pop in canonical order
    tensors.reverse();
    let mut next = move || tensors.pop().expect("tensor count matches");
    ViTParams {
        patch_weight: next(),
        patch_bias: next(),
        cls_token: next(),
        pos_embedding: next(),
        blocks: template
            .blocks
            .iter()
            .map(|_| crate::model::BlockParams {
                ln1_gamma: next(),
                ln1_beta: next(),
                qkv_weight: next(),
                out_weight: next(),
                out_bias: next(),
                ln2_gamma: next(),
                ln2_beta: next(),
                fc1_weight: next(),
                fc1_bias: next(),
                fc2_weight: next(),
                fc2_bias: next(),
            })
            .collect(),
        final_ln_gamma: next(),
        final_ln_beta: next(),
        head_weight: next(),
        head_bias: next(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    fn tiny() -> (ModelConfig, ViTParams) {
        let cfg = ModelConfig {
            image_size: 8,
            patch_size: 4,
            embed_dim: 4,
            depth: 1,
            num_heads: 1,
            mlp_hidden_dim: 8,
            num_classes: 2,
            ..ModelConfig::default()
        };
        let params = init_params(&cfg, 0).unwrap();
        (cfg, params)
    }

    fn seed_grads(params: &ViTParams, value: f32) {
        for (_, t) in params.named_tensors() {
            t.accumulate_grad(&vec![value; t.numel()]);
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let (_, params) = tiny();
        seed_grads(&params, 0.0);
        let mut state = AdamState::new(&params);
        let cfg = TrainConfig::default();
        let updated = optimizer_step(&params, &mut state, &cfg).unwrap();
        for ((_, a), (_, b)) in params.named_tensors().iter().zip(updated.named_tensors()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        // bias-corrected moments cancel at t=1: delta = -lr * g/|g| = -lr
        let (_, params) = tiny();
        seed_grads(&params, 1.0);
        let mut state = AdamState::new(&params);
        let cfg = TrainConfig::default();
        let updated = optimizer_step(&params, &mut state, &cfg).unwrap();
        for ((_, a), (_, b)) in params.named_tensors().iter().zip(updated.named_tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!(((x - y) - 1e-4).abs() < 1e-7, "delta {}", x - y);
            }
        }
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn lr_zero_is_identity() {
        let (_, params) = tiny();
        seed_grads(&params, 0.7);
        let mut state = AdamState::new(&params);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let updated = optimizer_step(&params, &mut state, &cfg).unwrap();
        for ((_, a), (_, b)) in params.named_tensors().iter().zip(updated.named_tensors()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn missing_gradient_names_the_tensor() {
        let (_, params) = tiny();
        seed_grads(&params, 1.0);
        params.cls_token.zero_grad();
        let mut state = AdamState::new(&params);
        let err = optimizer_step(&params, &mut state, &TrainConfig::default()).unwrap_err();
        assert!(err.to_string().contains("cls_token"), "{err}");
    }
}
