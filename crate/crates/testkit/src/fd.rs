//! Finite-difference gradient checks of the engine's analytic gradients
//! against the f64 reference model.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use bornovit::model::{forward, Mode, ModelConfig, ViTParams};
use bornovit::rng::stream;
use bornovit::tensor::{cross_entropy, Tensor};

use crate::ref_model::RefViT;

#[derive(Debug)]
pub struct FdFailure {
    pub tensor: String,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
}

pub struct FdCheck {
    pub coords_checked: usize,
    pub failures: Vec<FdFailure>,
}

/// Compare analytic parameter gradients of the eval-mode cross-entropy loss
/// (dropout off) against central finite differences computed through the
/// f64 reference model.
///
/// `coords_per_tensor` coordinates are sampled per parameter tensor (all of
/// them when the tensor is smaller). Acceptance: |a - n| <= rtol * max(|a|,
/// |n|) + atol.
#[allow(clippy::too_many_arguments)]
pub fn fd_gradient_check(
    cfg: &ModelConfig,
    params: &ViTParams,
    images: &[Vec<f32>],
    labels: &[usize],
    coords_per_tensor: usize,
    step: f64,
    rtol: f64,
    atol: f64,
    sample_seed: u64,
) -> FdCheck {
    let per = 3 * cfg.image_size * cfg.image_size;
    let mut data = Vec::with_capacity(images.len() * per);
    for img in images {
        assert_eq!(img.len(), per);
        data.extend_from_slice(img);
    }
    let batch = Tensor::from_vec(&[images.len(), 3, cfg.image_size, cfg.image_size], data)
        .expect("valid image batch");
    let out = forward(params, cfg, &batch, Mode::Eval, None, false).expect("forward");
    let loss = cross_entropy(&out.logits, labels).expect("loss");
    loss.backward().expect("backward");

    let reference = RefViT::from_params(cfg, params);
    let images64: Vec<Vec<f64>> = images
        .iter()
        .map(|img| img.iter().map(|&v| f64::from(v)).collect())
        .collect();

    // sample coordinates per tensor
    let mut rng = stream(sample_seed, &[0xfd]);
    let mut tasks: Vec<(String, usize, f64)> = Vec::new();
    for (name, tensor) in params.named_tensors() {
        let grad = tensor
            .grad()
            .unwrap_or_else(|| panic!("no gradient on {name}"));
        let mut coords: Vec<usize> = (0..tensor.numel()).collect();
        coords.shuffle(&mut rng);
        coords.truncate(coords_per_tensor.min(tensor.numel()));
        for c in coords {
            tasks.push((name.clone(), c, f64::from(grad[c])));
        }
    }

    let failures: Vec<FdFailure> = tasks
        .par_iter()
        .filter_map(|(name, coord, analytic)| {
            let mut perturbed = reference.clone();
            let original = perturbed.tensor(name)[*coord];
            perturbed.tensor_mut(name)[*coord] = original + step;
            let plus = perturbed.ce_loss(&images64, labels);
            perturbed.tensor_mut(name)[*coord] = original - step;
            let minus = perturbed.ce_loss(&images64, labels);
            let numeric = (plus - minus) / (2.0 * step);
            let bound = rtol * analytic.abs().max(numeric.abs()) + atol;
            if (analytic - numeric).abs() > bound {
                Some(FdFailure {
                    tensor: name.clone(),
                    coord: *coord,
                    analytic: *analytic,
                    numeric,
                })
            } else {
                None
            }
        })
        .collect();

    FdCheck {
        coords_checked: tasks.len(),
        failures,
    }
}
