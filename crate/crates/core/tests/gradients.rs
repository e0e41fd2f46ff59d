//! Whole-model gradient verification against the independent f64 reference
//! implementation, plus forward-pass agreement between the two routes.

use bornovit::model::{forward, init_params, Mode, ModelConfig};
use bornovit::rng::stream;
use bornovit::tensor::Tensor;
use bornovit_testkit::{fd_gradient_check, RefViT};
use rand::Rng;

fn reduced_cfg() -> ModelConfig {
    ModelConfig {
        image_size: 32,
        patch_size: 8,
        embed_dim: 32,
        depth: 2,
        num_heads: 2,
        mlp_hidden_dim: 64,
        num_classes: 3,
        ..ModelConfig::default()
    }
}

fn random_images(seed: u64, cfg: &ModelConfig, count: usize) -> Vec<Vec<f32>> {
    let mut rng = stream(seed, &[0x696d67]);
    (0..count)
        .map(|_| {
            (0..3 * cfg.image_size * cfg.image_size)
                .map(|_| rng.random_range(0.0..1.0))
                .collect()
        })
        .collect()
}

#[test]
fn forward_agrees_with_f64_reference() {
    let cfg = reduced_cfg();
    let params = init_params(&cfg, 3).unwrap();
    let reference = RefViT::from_params(&cfg, &params);
    for (i, image) in random_images(10, &cfg, 4).into_iter().enumerate() {
        let t = Tensor::from_vec(&[1, 3, 32, 32], image.clone()).unwrap();
        let logits = forward(&params, &cfg, &t, Mode::Eval, None, false)
            .unwrap()
            .logits;
        let image64: Vec<f64> = image.iter().map(|&v| f64::from(v)).collect();
        let expected = reference.logits(&image64);
        for (j, (a, e)) in logits.data().iter().zip(&expected).enumerate() {
            let diff = (f64::from(*a) - e).abs();
            assert!(
                diff <= 1e-4 * e.abs().max(1.0),
                "image {i} logit {j}: engine {a}, reference {e}"
            );
        }
    }
}

#[test]
fn reduced_model_gradients_match_finite_differences() {
    let cfg = reduced_cfg();
    let params = init_params(&cfg, 4).unwrap();
    let images = random_images(11, &cfg, 2);
    let labels = vec![0usize, 2];
    let check = fd_gradient_check(&cfg, &params, &images, &labels, 50, 1e-3, 1e-2, 2e-5, 7);
    assert!(check.coords_checked >= 50 * 10);
    assert!(
        check.failures.is_empty(),
        "{} of {} coordinates disagree; first: {:?}",
        check.failures.len(),
        check.coords_checked,
        check.failures.first()
    );
}

#[test]
fn default_model_gradients_spot_checked_against_finite_differences() {
    // full architecture on one input, one sampled coordinate per tensor
    // (52 tensors), dropout off
    let cfg = ModelConfig {
        num_classes: 10,
        ..ModelConfig::default()
    };
    let params = init_params(&cfg, 5).unwrap();
    let images = random_images(12, &cfg, 1);
    let labels = vec![3usize];
    let check = fd_gradient_check(&cfg, &params, &images, &labels, 1, 1e-3, 1e-2, 2e-5, 8);
    assert!(check.coords_checked >= 50);
    assert!(
        check.failures.is_empty(),
        "{} of {} coordinates disagree; first: {:?}",
        check.failures.len(),
        check.coords_checked,
        check.failures.first()
    );
}
