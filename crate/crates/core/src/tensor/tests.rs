use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{cross_entropy, Tensor, TensorError};
use crate::rng::stream;

fn randn(seed: u64, n: usize) -> Vec<f32> {
    let mut rng = stream(seed, &[0x7465]);
    let dist = Normal::new(0.0f64, 1.0).unwrap();
    (0..n).map(|_| dist.sample(&mut rng) as f32).collect()
}

fn assert_close(actual: &[f32], expected: &[f32], tol: f32) {
    assert_eq!(actual.len(), expected.len());
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!(
            (a - e).abs() <= tol,
            "coord {i}: actual {a} expected {e} (tol {tol})"
        );
    }
}

// ── finite-difference harness ────────────────────────────────────────
//
// Each op test supplies the f32 loss built through the engine and an
// independent f64 evaluation of the same loss. Central differences on the
// f64 route are the oracle for the engine's analytic gradients.

fn fd_check<B, E>(inputs: &[(Vec<usize>, Vec<f32>)], build: B, eval: E, rtol: f64, atol: f64)
where
    B: Fn(&[Tensor]) -> Tensor,
    E: Fn(&[Vec<f64>]) -> f64,
{
    let tensors: Vec<Tensor> = inputs
        .iter()
        .map(|(s, d)| Tensor::param(s, d.clone()).unwrap())
        .collect();
    let loss = build(&tensors);
    assert_eq!(loss.numel(), 1);
    loss.backward().unwrap();

    let h = 1e-3f64;
    let base: Vec<Vec<f64>> = inputs
        .iter()
        .map(|(_, d)| d.iter().map(|&x| x as f64).collect())
        .collect();
    for (i, (_, data)) in inputs.iter().enumerate() {
        let grad = tensors[i].grad().expect("gradient populated");
        for j in 0..data.len() {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i][j] += h;
            minus[i][j] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = grad[j] as f64;
            let bound = rtol * a.abs().max(fd.abs()) + atol;
            assert!(
                (a - fd).abs() <= bound,
                "input {i} coord {j}: analytic {a} vs finite-diff {fd}"
            );
        }
    }
}

fn mm64(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            for j in 0..n {
                out[i * n + j] += a[i * k + p] * b[p * n + j];
            }
        }
    }
    out
}

fn weighted_sum64(values: &[f64], weights: &[f32]) -> f64 {
    values
        .iter()
        .zip(weights)
        .map(|(v, &w)| v * w as f64)
        .sum()
}

/// Loss head used by the op checks: a fixed random linear functional of the
/// op output, so every output coordinate influences the scalar.
fn weighted_loss(out: &Tensor, weights: &[f32]) -> Tensor {
    let w = Tensor::from_vec(out.shape(), weights.to_vec()).unwrap();
    out.mul(&w).unwrap().sum_all()
}

// ── construction and bookkeeping ─────────────────────────────────────

#[test]
fn from_vec_validates_shape_and_length() {
    assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
    assert!(matches!(
        Tensor::from_vec(&[2, 3], vec![0.0; 5]),
        Err(TensorError::DataLength { .. })
    ));
    assert!(matches!(
        Tensor::from_vec(&[2, 0], vec![]),
        Err(TensorError::InvalidShape { .. })
    ));
    assert!(matches!(
        Tensor::from_vec(&[], vec![]),
        Err(TensorError::InvalidShape { .. })
    ));
}

#[test]
fn backward_rejects_non_scalar() {
    let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
    let y = x.scale(2.0);
    assert!(matches!(y.backward(), Err(TensorError::NotScalar { .. })));
}

// ── matmul ───────────────────────────────────────────────────────────

#[test]
fn matmul_identity() {
    let eye = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let b = Tensor::from_vec(&[2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap();
    let c = eye.matmul(&b).unwrap();
    assert_eq!(c.data(), &[3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn matmul_by_hand() {
    let a = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
    let b = Tensor::from_vec(&[2, 1], vec![3.0, 4.0]).unwrap();
    let c = a.matmul(&b).unwrap();
    assert_eq!(c.shape(), &[1, 1]);
    assert_eq!(c.data(), &[11.0]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let a = Tensor::from_vec(&[2, 3], vec![0.0; 6]).unwrap();
    let b = Tensor::from_vec(&[4, 2], vec![0.0; 8]).unwrap();
    let err = a.matmul(&b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
}

#[test]
fn matmul_gradients_match_finite_differences() {
    let (m, k, n) = (5, 7, 3);
    let a = randn(1, m * k);
    let b = randn(2, k * n);
    let r = randn(3, m * n);
    let r_b = r.clone();
    fd_check(
        &[(vec![m, k], a), (vec![k, n], b)],
        |ts| weighted_loss(&ts[0].matmul(&ts[1]).unwrap(), &r),
        |xs| weighted_sum64(&mm64(&xs[0], &xs[1], m, k, n), &r_b),
        1e-3,
        1e-6,
    );
}

#[test]
fn matmul_batched_shared_rhs_accumulates_rhs_grad() {
    // two batch entries sharing B: dB must sum both contributions
    let a = Tensor::param(&[2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = Tensor::param(&[2, 1], vec![1.0, 1.0]).unwrap();
    let c = a.matmul(&b).unwrap();
    assert_eq!(c.shape(), &[2, 1, 1]);
    assert_eq!(c.data(), &[3.0, 7.0]);
    c.sum_all().backward().unwrap();
    assert_eq!(b.grad().unwrap(), vec![1.0 + 3.0, 2.0 + 4.0]);
}

// ── softmax ──────────────────────────────────────────────────────────

#[test]
fn softmax_symmetric_pair() {
    let x = Tensor::from_vec(&[2], vec![0.0, 0.0]).unwrap();
    assert_close(x.softmax_last().data(), &[0.5, 0.5], 1e-7);
}

#[test]
fn softmax_huge_logits_no_overflow() {
    let x = Tensor::from_vec(&[3], vec![1000.0, 1000.0, 1000.0]).unwrap();
    let y = x.softmax_last();
    assert!(y.data().iter().all(|v| v.is_finite()));
    assert_close(y.data(), &[1.0 / 3.0; 3], 1e-6);
}

#[test]
fn softmax_direct_evaluation() {
    let x = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
    assert_close(
        x.softmax_last().data(),
        &[0.090_030_57, 0.244_728_47, 0.665_240_96],
        1e-5,
    );
}

#[test]
fn softmax_gradients_match_finite_differences() {
    let x = randn(4, 12);
    let r = randn(5, 12);
    let r_b = r.clone();
    fd_check(
        &[(vec![3, 4], x)],
        |ts| weighted_loss(&ts[0].softmax_last(), &r),
        |xs| {
            let mut out = Vec::new();
            for row in xs[0].chunks(4) {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                out.extend(exps.iter().map(|e| e / sum));
            }
            weighted_sum64(&out, &r_b)
        },
        1e-3,
        1e-6,
    );
}

proptest! {
    #[test]
    fn softmax_rows_are_probability_simplexes(rows in 1usize..6, cols in 1usize..9, seed in 0u64..1000) {
        let x = Tensor::from_vec(&[rows, cols], randn(seed, rows * cols)).unwrap();
        let y = x.softmax_last();
        for row in y.data().chunks(cols) {
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            let sum: f32 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6, "row sum {sum}");
        }
    }
}

// ── layer norm ───────────────────────────────────────────────────────

#[test]
fn layer_norm_constant_row_maps_to_beta() {
    let x = Tensor::from_vec(&[1, 4], vec![5.0; 4]).unwrap();
    let g = Tensor::from_vec(&[4], vec![1.0; 4]).unwrap();
    let b = Tensor::from_vec(&[4], vec![0.0; 4]).unwrap();
    let y = x.layer_norm(&g, &b, 1e-6).unwrap();
    assert_close(y.data(), &[0.0; 4], 1e-6);
}

#[test]
fn layer_norm_two_point_standardization() {
    let x = Tensor::from_vec(&[1, 2], vec![1.0, 3.0]).unwrap();
    let g = Tensor::from_vec(&[2], vec![1.0; 2]).unwrap();
    let b = Tensor::from_vec(&[2], vec![0.0; 2]).unwrap();
    let y = x.layer_norm(&g, &b, 1e-6).unwrap();
    assert_close(y.data(), &[-1.0, 1.0], 1e-3);
}

#[test]
fn layer_norm_row_statistics() {
    let (rows, d) = (197, 128);
    let x = Tensor::from_vec(&[rows, d], randn(6, rows * d)).unwrap();
    let g = Tensor::from_vec(&[d], vec![1.0; d]).unwrap();
    let b = Tensor::from_vec(&[d], vec![0.0; d]).unwrap();
    let y = x.layer_norm(&g, &b, 1e-6).unwrap();
    for row in y.data().chunks(d) {
        let mean = row.iter().sum::<f32>() / d as f32;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
        assert!(mean.abs() < 1e-5, "row mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "row var {var}");
    }
}

#[test]
fn layer_norm_gradients_match_finite_differences() {
    let (rows, d) = (3, 5);
    let x = randn(7, rows * d);
    let g = randn(8, d);
    let b = randn(9, d);
    let r = randn(10, rows * d);
    let r_b = r.clone();
    let eps = 1e-6f64;
    fd_check(
        &[(vec![rows, d], x), (vec![d], g), (vec![d], b)],
        |ts| weighted_loss(&ts[0].layer_norm(&ts[1], &ts[2], 1e-6).unwrap(), &r),
        move |xs| {
            let mut out = Vec::new();
            for row in xs[0].chunks(d) {
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                let istd = 1.0 / (var + eps).sqrt();
                for j in 0..d {
                    out.push(xs[1][j] * (row[j] - mean) * istd + xs[2][j]);
                }
            }
            weighted_sum64(&out, &r_b)
        },
        1e-3,
        1e-6,
    );
}

// ── gelu ─────────────────────────────────────────────────────────────

fn gelu64(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x * x * x)).tanh())
}

#[test]
fn gelu_fixed_points() {
    let x = Tensor::from_vec(&[3], vec![0.0, 10.0, 1.0]).unwrap();
    let y = x.gelu();
    assert_eq!(y.data()[0], 0.0);
    assert!((y.data()[1] - 10.0).abs() < 1e-4);
    assert!((y.data()[2] - 0.8412).abs() < 1e-4);
}

#[test]
fn gelu_gradients_match_finite_differences() {
    let x = randn(11, 16);
    let r = randn(12, 16);
    let r_b = r.clone();
    fd_check(
        &[(vec![16], x)],
        |ts| weighted_loss(&ts[0].gelu(), &r),
        |xs| weighted_sum64(&xs[0].iter().map(|&v| gelu64(v)).collect::<Vec<_>>(), &r_b),
        1e-3,
        1e-6,
    );
}

// ── cross entropy ────────────────────────────────────────────────────

#[test]
fn cross_entropy_uniform_pair() {
    let logits = Tensor::from_vec(&[1, 2], vec![0.0, 0.0]).unwrap();
    let loss = cross_entropy(&logits, &[0]).unwrap();
    assert!((loss.item() - std::f32::consts::LN_2).abs() < 1e-6);
}

#[test]
fn cross_entropy_certain_correct_class() {
    let logits = Tensor::from_vec(&[1, 2], vec![1e9, 0.0]).unwrap();
    let loss = cross_entropy(&logits, &[0]).unwrap();
    assert!(loss.item().is_finite());
    assert!(loss.item().abs() < 1e-6);
}

#[test]
fn cross_entropy_rejects_bad_label() {
    let logits = Tensor::from_vec(&[1, 2], vec![0.0, 0.0]).unwrap();
    let err = cross_entropy(&logits, &[2]).unwrap_err();
    assert!(err.to_string().contains("label 2"), "{err}");
}

#[test]
fn cross_entropy_gradients_match_finite_differences() {
    let (batch, classes) = (4, 10);
    let x = randn(13, batch * classes);
    let labels = [3usize, 0, 9, 5];
    fd_check(
        &[(vec![batch, classes], x)],
        |ts| cross_entropy(&ts[0], &labels).unwrap(),
        |xs| {
            let mut total = 0.0f64;
            for (b, row) in xs[0].chunks(classes).enumerate() {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - row[labels[b]];
            }
            total / batch as f64
        },
        1e-3,
        1e-7,
    );
}

// ── backward bookkeeping ─────────────────────────────────────────────

#[test]
fn backward_sum_gives_ones() {
    let x = Tensor::param(&[2, 3], vec![1.0; 6]).unwrap();
    x.sum_all().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0; 6]);
}

#[test]
fn backward_sum_of_squares_gives_two_x() {
    let data = vec![1.0, -2.0, 3.0, 0.5];
    let x = Tensor::param(&[4], data.clone()).unwrap();
    x.mul(&x).unwrap().sum_all().backward().unwrap();
    let expected: Vec<f32> = data.iter().map(|v| 2.0 * v).collect();
    assert_close(&x.grad().unwrap(), &expected, 1e-6);
}

#[test]
fn backward_accumulates_over_reused_tensor() {
    // loss = sum(x) + sum(2x) -> grad 3 everywhere
    let x = Tensor::param(&[5], vec![0.3; 5]).unwrap();
    let loss = x.sum_all().add(&x.scale(2.0).sum_all()).unwrap();
    loss.backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![3.0; 5]);
}

#[test]
fn backward_leaves_untracked_tensors_untouched() {
    let x = Tensor::param(&[3], vec![1.0; 3]).unwrap();
    let c = Tensor::from_vec(&[3], vec![2.0; 3]).unwrap();
    x.mul(&c).unwrap().sum_all().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![2.0; 3]);
    assert!(c.grad().is_none());
}

// ── structural ops ───────────────────────────────────────────────────

#[test]
fn add_broadcasts_bias_over_rows() {
    let x = Tensor::param(&[2, 3], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let b = Tensor::param(&[3], vec![10.0, 20.0, 30.0]).unwrap();
    let y = x.add(&b).unwrap();
    assert_eq!(y.data(), &[10.0, 21.0, 32.0, 13.0, 24.0, 35.0]);
    y.sum_all().backward().unwrap();
    assert_eq!(b.grad().unwrap(), vec![2.0; 3]);
    assert_eq!(x.grad().unwrap(), vec![1.0; 6]);
}

#[test]
fn add_broadcasts_table_over_batch() {
    let x = Tensor::param(&[2, 2, 2], vec![0.0; 8]).unwrap();
    let table = Tensor::param(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let y = x.add(&table).unwrap();
    assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
    y.sum_all().backward().unwrap();
    assert_eq!(table.grad().unwrap(), vec![2.0; 4]);
}

#[test]
fn add_rejects_incompatible_shapes() {
    let x = Tensor::from_vec(&[2, 3], vec![0.0; 6]).unwrap();
    let y = Tensor::from_vec(&[2, 2], vec![0.0; 4]).unwrap();
    assert!(matches!(
        x.add(&y),
        Err(TensorError::ShapeMismatch { .. })
    ));
}

#[test]
fn slice_concat_roundtrip_and_grads() {
    let x = Tensor::param(&[2, 4], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
    let a = x.slice(1, 0, 2).unwrap();
    let b = x.slice(1, 2, 2).unwrap();
    let back = Tensor::concat(&[&a, &b], 1).unwrap();
    assert_eq!(back.data(), x.data());
    back.mul(&Tensor::from_vec(&[2, 4], vec![1.0; 8]).unwrap())
        .unwrap()
        .sum_all()
        .backward()
        .unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0; 8]);
}

#[test]
fn slice_out_of_range_error() {
    let x = Tensor::from_vec(&[2, 4], vec![0.0; 8]).unwrap();
    assert!(matches!(
        x.slice(1, 3, 2),
        Err(TensorError::SliceOutOfRange { .. })
    ));
}

#[test]
fn repeat_axis0_backward_sums() {
    let x = Tensor::param(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap();
    let y = x.repeat_axis0(4).unwrap();
    assert_eq!(y.shape(), &[4, 3]);
    y.sum_all().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![4.0; 3]);
}

#[test]
fn index_select_gathers_and_scatters() {
    let table = Tensor::param(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let picked = table.index_select(&[2, 0, 2]).unwrap();
    assert_eq!(picked.data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
    picked.sum_all().backward().unwrap();
    assert_eq!(table.grad().unwrap(), vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    assert!(matches!(
        table.index_select(&[3]),
        Err(TensorError::IndexOutOfRange { index: 3, rows: 3 })
    ));
}

#[test]
fn mean_and_var_last_axis() {
    let x = Tensor::param(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 6.0, 8.0]).unwrap();
    let m = x.mean_last();
    assert_eq!(m.shape(), &[2, 1]);
    assert_close(m.data(), &[2.0, 6.0], 1e-6);
    let v = x.var_last();
    assert_close(v.data(), &[2.0 / 3.0, 8.0 / 3.0], 1e-6);

    let r = randn(20, 6);
    let r_b = r.clone();
    fd_check(
        &[(vec![2, 3], randn(21, 6))],
        |ts| weighted_loss(&ts[0].var_last(), &r[..2]),
        |xs| {
            let mut out = Vec::new();
            for row in xs[0].chunks(3) {
                let mean = row.iter().sum::<f64>() / 3.0;
                out.push(row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0);
            }
            weighted_sum64(&out, &r_b[..2])
        },
        1e-3,
        1e-6,
    );
}

proptest! {
    #[test]
    fn reshape_roundtrip_is_identity(rows in 1usize..5, cols in 1usize..5, seed in 0u64..100) {
        let data = randn(seed, rows * cols);
        let x = Tensor::from_vec(&[rows, cols], data.clone()).unwrap();
        let y = x.reshape(&[cols * rows]).unwrap().reshape(&[rows, cols]).unwrap();
        prop_assert_eq!(y.data(), &data[..]);
    }

    #[test]
    fn transpose_roundtrip_is_identity(rows in 1usize..6, cols in 1usize..6, seed in 0u64..100) {
        let data = randn(seed, rows * cols);
        let x = Tensor::from_vec(&[rows, cols], data.clone()).unwrap();
        let y = x.transpose_last2().unwrap().transpose_last2().unwrap();
        prop_assert_eq!(y.data(), &data[..]);
    }
}

// ── dropout ──────────────────────────────────────────────────────────

#[test]
fn dropout_eval_and_p_zero_are_exact_identity() {
    let data = randn(30, 32);
    let x = Tensor::from_vec(&[32], data.clone()).unwrap();
    let mut rng = stream(0, &[1]);
    let eval_out = x.dropout(0.5, false, &mut rng).unwrap();
    assert_eq!(eval_out.data(), &data[..]);
    let p0_out = x.dropout(0.0, true, &mut rng).unwrap();
    assert_eq!(p0_out.data(), &data[..]);
}

#[test]
fn dropout_train_zeroes_and_rescales() {
    let n = 10_000;
    let p = 0.3f32;
    let x = Tensor::param(&[n], vec![1.0; n]).unwrap();
    let mut rng = stream(1, &[2]);
    let y = x.dropout(p, true, &mut rng).unwrap();
    let scale = 1.0 / (1.0 - p);
    let mut zeros = 0usize;
    for &v in y.data() {
        assert!(v == 0.0 || (v - scale).abs() < 1e-6);
        if v == 0.0 {
            zeros += 1;
        }
    }
    let frac = zeros as f32 / n as f32;
    assert!((frac - p).abs() < 0.02, "drop fraction {frac}");
    // backward passes the same mask
    y.sum_all().backward().unwrap();
    let g = x.grad().unwrap();
    for (gv, yv) in g.iter().zip(y.data()) {
        assert_eq!(gv, yv);
    }
}

#[test]
fn dropout_rejects_invalid_probability() {
    let x = Tensor::from_vec(&[1], vec![1.0]).unwrap();
    let mut rng = stream(0, &[3]);
    assert!(x.dropout(1.0, true, &mut rng).is_err());
    assert!(x.dropout(-0.1, true, &mut rng).is_err());
}

// ── scale / transpose grads ──────────────────────────────────────────

#[test]
fn transpose_and_scale_gradients() {
    let x = Tensor::param(&[2, 3], randn(40, 6)).unwrap();
    let r = randn(41, 6);
    let w = Tensor::from_vec(&[3, 2], r.clone()).unwrap();
    x.transpose_last2()
        .unwrap()
        .scale(2.5)
        .mul(&w)
        .unwrap()
        .sum_all()
        .backward()
        .unwrap();
    // d/dx of 2.5 * xᵀ ⊙ w is 2.5 * wᵀ
    let g = x.grad().unwrap();
    for i in 0..2 {
        for j in 0..3 {
            assert!((g[i * 3 + j] - 2.5 * r[j * 2 + i]).abs() < 1e-6);
        }
    }
}

#[test]
fn deterministic_rng_streams() {
    let a: Vec<f32> = {
        let mut r = stream(7, &[1, 2]);
        (0..8).map(|_| r.random::<f32>()).collect()
    };
    let b: Vec<f32> = {
        let mut r = stream(7, &[1, 2]);
        (0..8).map(|_| r.random::<f32>()).collect()
    };
    let c: Vec<f32> = {
        let mut r = stream(7, &[1, 3]);
        (0..8).map(|_| r.random::<f32>()).collect()
    };
    assert_eq!(a, b);
    assert_ne!(a, c);
}
