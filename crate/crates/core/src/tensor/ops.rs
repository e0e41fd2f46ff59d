//! Differentiable tensor operations.
//!
//! Every op computes its value eagerly and, when an input is tracked, records
//! a closure computing the vector-Jacobian product for the backward pass.
//! Closures capture shared data buffers, never tensor handles, so a graph
//! never cycles.

use std::rc::Rc;

use rand::Rng;

use super::kernels::{mm_nn, mm_nt, mm_tn};
use super::{op_output, Tensor, TensorError};

const GELU_COEF: f32 = 0.044715;
// sqrt(2 / pi)
const GELU_SCALE: f32 = 0.797_884_6;

fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, inner)
}

/// True when `small` (padded with leading 1s) broadcasts onto `big` with the
/// repeated axes forming a prefix, i.e. `small`'s non-unit dims are a suffix
/// of `big`. This is the only broadcast shape the engine supports: it covers
/// bias addition over rows and adding a per-position table over a batch.
fn leading_broadcast(big: &[usize], small: &[usize]) -> Option<usize> {
    if small.len() > big.len() {
        return None;
    }
    let pad = big.len() - small.len();
    let mut period = 1usize;
    let mut saw_non_unit = false;
    for (i, &b) in big.iter().enumerate() {
        let s = if i < pad { 1 } else { small[i - pad] };
        if s == b {
            if s != 1 {
                saw_non_unit = true;
            }
            if saw_non_unit {
                period *= b;
            }
        } else if s == 1 {
            if saw_non_unit {
                // repeat axis after a matched axis: not a leading broadcast
                return None;
            }
        } else {
            return None;
        }
    }
    // all-unit small (scalar) repeats with period 1
    Some(period.max(1))
}

impl Tensor {
    /// Matrix product. Accepts `[m,k]·[k,n]`, a batched left operand against
    /// a shared rank-2 right operand, or two operands with identical leading
    /// batch dimensions.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor, TensorError> {
        let ls = self.shape().to_vec();
        let rs = rhs.shape().to_vec();
        let mismatch = || TensorError::ShapeMismatch {
            op: "matmul",
            left: ls.clone(),
            right: rs.clone(),
        };
        if ls.len() < 2 || rs.len() < 2 {
            return Err(mismatch());
        }
        let (m, k) = (ls[ls.len() - 2], ls[ls.len() - 1]);
        let (k2, n) = (rs[rs.len() - 2], rs[rs.len() - 1]);
        if k != k2 {
            return Err(mismatch());
        }
        let shared_rhs = rs.len() == 2;
        if !shared_rhs && rs[..rs.len() - 2] != ls[..ls.len() - 2] {
            return Err(mismatch());
        }
        let batch: usize = ls[..ls.len() - 2].iter().product();

        let a = self.data_rc();
        let b = rhs.data_rc();
        let mut out = vec![0.0f32; batch * m * n];
        for bi in 0..batch {
            let bslice = if shared_rhs {
                &b[..]
            } else {
                &b[bi * k * n..(bi + 1) * k * n]
            };
            mm_nn(
                &a[bi * m * k..(bi + 1) * m * k],
                bslice,
                m,
                k,
                n,
                &mut out[bi * m * n..(bi + 1) * m * n],
            );
        }
        let mut out_shape = ls[..ls.len() - 2].to_vec();
        out_shape.push(m);
        out_shape.push(n);

        let need_da = self.is_tracked();
        let need_db = rhs.is_tracked();
        let (a_len, b_len) = (a.len(), b.len());
        let backward = Box::new(move |up: &[f32]| {
            let mut da = if need_da { Some(vec![0.0f32; a_len]) } else { None };
            let mut db = if need_db { Some(vec![0.0f32; b_len]) } else { None };
            for bi in 0..batch {
                let up_b = &up[bi * m * n..(bi + 1) * m * n];
                if let Some(da) = da.as_mut() {
                    let bslice = if shared_rhs {
                        &b[..]
                    } else {
                        &b[bi * k * n..(bi + 1) * k * n]
                    };
                    // dA = dC · Bᵀ
                    mm_nt(up_b, bslice, m, n, k, &mut da[bi * m * k..(bi + 1) * m * k]);
                }
                if let Some(db) = db.as_mut() {
                    let dst = if shared_rhs {
                        &mut db[..]
                    } else {
                        &mut db[bi * k * n..(bi + 1) * k * n]
                    };
                    // dB = Aᵀ · dC, summed over the batch when B is shared
                    mm_tn(&a[bi * m * k..(bi + 1) * m * k], up_b, m, k, n, dst);
                }
            }
            vec![da, db]
        });
        Ok(op_output(
            out_shape,
            Rc::new(out),
            vec![self.clone(), rhs.clone()],
            backward,
        ))
    }

    /// Elementwise sum with limited broadcasting: either both shapes match,
    /// or the smaller operand's shape is a suffix of the larger's (after
    /// padding with leading 1s) and repeats along the leading axes.
    pub fn add(&self, rhs: &Tensor) -> Result<Tensor, TensorError> {
        let ls = self.shape();
        let rs = rhs.shape();
        if ls == rs {
            let a = self.data_rc();
            let b = rhs.data_rc();
            let out: Vec<f32> = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
            let need = (self.is_tracked(), rhs.is_tracked());
            let backward = Box::new(move |up: &[f32]| {
                vec![
                    need.0.then(|| up.to_vec()),
                    need.1.then(|| up.to_vec()),
                ]
            });
            return Ok(op_output(
                ls.to_vec(),
                Rc::new(out),
                vec![self.clone(), rhs.clone()],
                backward,
            ));
        }

        // exactly one side must broadcast onto the other
        let (big_first, period) = if let Some(p) = leading_broadcast(ls, rs) {
            (true, p)
        } else if let Some(p) = leading_broadcast(rs, ls) {
            (false, p)
        } else {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                left: ls.to_vec(),
                right: rs.to_vec(),
            });
        };
        let (big, small) = if big_first { (self, rhs) } else { (rhs, self) };
        debug_assert_eq!(small.numel(), period);
        let bd = big.data_rc();
        let sd = small.data_rc();
        let mut out = Vec::with_capacity(bd.len());
        for chunk in bd.chunks(period) {
            for (x, y) in chunk.iter().zip(sd.iter()) {
                out.push(x + y);
            }
        }
        let need_big = big.is_tracked();
        let need_small = small.is_tracked();
        let backward = Box::new(move |up: &[f32]| {
            let dbig = need_big.then(|| up.to_vec());
            let dsmall = need_small.then(|| {
                let mut g = vec![0.0f32; period];
                for chunk in up.chunks(period) {
                    for (acc, x) in g.iter_mut().zip(chunk) {
                        *acc += *x;
                    }
                }
                g
            });
            if big_first {
                vec![dbig, dsmall]
            } else {
                vec![dsmall, dbig]
            }
        });
        Ok(op_output(
            big.shape().to_vec(),
            Rc::new(out),
            vec![self.clone(), rhs.clone()],
            backward,
        ))
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor, TensorError> {
        self.add(&rhs.scale(-1.0))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor, TensorError> {
        if self.shape() != rhs.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                left: self.shape().to_vec(),
                right: rhs.shape().to_vec(),
            });
        }
        let a = self.data_rc();
        let b = rhs.data_rc();
        let out: Vec<f32> = a.iter().zip(b.iter()).map(|(x, y)| x * y).collect();
        let need = (self.is_tracked(), rhs.is_tracked());
        let (ac, bc) = (Rc::clone(&a), Rc::clone(&b));
        let backward = Box::new(move |up: &[f32]| {
            vec![
                need.0
                    .then(|| up.iter().zip(bc.iter()).map(|(u, y)| u * y).collect()),
                need.1
                    .then(|| up.iter().zip(ac.iter()).map(|(u, x)| u * x).collect()),
            ]
        });
        Ok(op_output(
            self.shape().to_vec(),
            Rc::new(out),
            vec![self.clone(), rhs.clone()],
            backward,
        ))
    }

    pub fn scale(&self, c: f32) -> Tensor {
        let out: Vec<f32> = self.data().iter().map(|x| c * x).collect();
        let backward = Box::new(move |up: &[f32]| vec![Some(up.iter().map(|u| c * u).collect())]);
        op_output(self.shape().to_vec(), Rc::new(out), vec![self.clone()], backward)
    }

    /// Swap the last two axes.
    pub fn transpose_last2(&self) -> Result<Tensor, TensorError> {
        let s = self.shape();
        if s.len() < 2 {
            return Err(TensorError::InvalidShape {
                shape: s.to_vec(),
                reason: "transpose needs rank >= 2".into(),
            });
        }
        let (m, n) = (s[s.len() - 2], s[s.len() - 1]);
        let batch: usize = s[..s.len() - 2].iter().product();
        let src = self.data();
        let mut out = vec![0.0f32; src.len()];
        for bi in 0..batch {
            let base = bi * m * n;
            for i in 0..m {
                for j in 0..n {
                    out[base + j * m + i] = src[base + i * n + j];
                }
            }
        }
        let mut shape = s.to_vec();
        shape.swap(s.len() - 2, s.len() - 1);
        let backward = Box::new(move |up: &[f32]| {
            let mut g = vec![0.0f32; up.len()];
            for bi in 0..batch {
                let base = bi * m * n;
                // upstream has shape [.., n, m]; transpose it back
                for j in 0..n {
                    for i in 0..m {
                        g[base + i * n + j] = up[base + j * m + i];
                    }
                }
            }
            vec![Some(g)]
        });
        Ok(op_output(shape, Rc::new(out), vec![self.clone()], backward))
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    /// Shares the underlying storage.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor, TensorError> {
        let n = shape.iter().product::<usize>();
        if n != self.numel() || shape.is_empty() || shape.contains(&0) {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: self.shape().to_vec(),
                right: shape.to_vec(),
            });
        }
        let backward = Box::new(move |up: &[f32]| vec![Some(up.to_vec())]);
        Ok(op_output(
            shape.to_vec(),
            self.data_rc(),
            vec![self.clone()],
            backward,
        ))
    }

    /// Concatenate along `axis`; all other dimensions must agree.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor, TensorError> {
        assert!(!parts.is_empty(), "concat of zero tensors");
        let first = parts[0].shape().to_vec();
        if axis >= first.len() {
            return Err(TensorError::AxisOutOfBounds {
                axis,
                rank: first.len(),
            });
        }
        let mut axis_total = 0usize;
        for p in parts {
            let s = p.shape();
            if s.len() != first.len()
                || s.iter()
                    .zip(&first)
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: first.clone(),
                    right: s.to_vec(),
                });
            }
            axis_total += s[axis];
        }
        let mut shape = first.clone();
        shape[axis] = axis_total;
        let (outer, inner) = outer_inner(&shape, axis);
        let sizes: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let datas: Vec<Rc<Vec<f32>>> = parts.iter().map(|p| p.data_rc()).collect();

        let mut out = Vec::with_capacity(outer * axis_total * inner);
        for o in 0..outer {
            for (part, sz) in datas.iter().zip(&sizes) {
                let start = o * sz * inner;
                out.extend_from_slice(&part[start..start + sz * inner]);
            }
        }
        let needs: Vec<bool> = parts.iter().map(|p| p.is_tracked()).collect();
        let sizes_b = sizes.clone();
        let backward = Box::new(move |up: &[f32]| {
            let mut grads: Vec<Option<Vec<f32>>> = sizes_b
                .iter()
                .zip(&needs)
                .map(|(sz, need)| need.then(|| Vec::with_capacity(outer * sz * inner)))
                .collect();
            let mut cursor = 0usize;
            for _o in 0..outer {
                for (sz, slot) in sizes_b.iter().zip(grads.iter_mut()) {
                    let span = sz * inner;
                    if let Some(buf) = slot.as_mut() {
                        buf.extend_from_slice(&up[cursor..cursor + span]);
                    }
                    cursor += span;
                }
            }
            grads
        });
        Ok(op_output(
            shape,
            Rc::new(out),
            parts.iter().map(|p| (*p).clone()).collect(),
            backward,
        ))
    }

    /// Contiguous range `[start, start+len)` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor, TensorError> {
        let s = self.shape();
        if axis >= s.len() {
            return Err(TensorError::AxisOutOfBounds { axis, rank: s.len() });
        }
        if len == 0 || start + len > s[axis] {
            return Err(TensorError::SliceOutOfRange {
                axis,
                start,
                len,
                dim: s[axis],
            });
        }
        let (outer, inner) = outer_inner(s, axis);
        let dim = s[axis];
        let src = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * dim + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut shape = s.to_vec();
        shape[axis] = len;
        let total = self.numel();
        let backward = Box::new(move |up: &[f32]| {
            let mut g = vec![0.0f32; total];
            for o in 0..outer {
                let base = (o * dim + start) * inner;
                let ubase = o * len * inner;
                g[base..base + len * inner].copy_from_slice(&up[ubase..ubase + len * inner]);
            }
            vec![Some(g)]
        });
        Ok(op_output(shape, Rc::new(out), vec![self.clone()], backward))
    }

    /// Repeat a leading axis of size 1 `times` times.
    pub fn repeat_axis0(&self, times: usize) -> Result<Tensor, TensorError> {
        let s = self.shape();
        if s[0] != 1 || times == 0 {
            return Err(TensorError::InvalidShape {
                shape: s.to_vec(),
                reason: format!("repeat_axis0 x{times} needs a leading axis of size 1"),
            });
        }
        let period = self.numel();
        let src = self.data();
        let mut out = Vec::with_capacity(period * times);
        for _ in 0..times {
            out.extend_from_slice(src);
        }
        let mut shape = s.to_vec();
        shape[0] = times;
        let backward = Box::new(move |up: &[f32]| {
            let mut g = vec![0.0f32; period];
            for chunk in up.chunks(period) {
                for (acc, x) in g.iter_mut().zip(chunk) {
                    *acc += *x;
                }
            }
            vec![Some(g)]
        });
        Ok(op_output(shape, Rc::new(out), vec![self.clone()], backward))
    }

    /// Numerically stable softmax over the last axis. Each output row is a
    /// probability simplex.
    pub fn softmax_last(&self) -> Tensor {
        let cols = *self.shape().last().expect("rank >= 1");
        let src = self.data();
        let mut out = vec![0.0f32; src.len()];
        for (row, orow) in src.chunks(cols).zip(out.chunks_mut(cols)) {
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0f32;
            for (o, &x) in orow.iter_mut().zip(row) {
                let e = (x - max).exp();
                *o = e;
                sum += e;
            }
            let inv = 1.0 / sum;
            for o in orow.iter_mut() {
                *o *= inv;
            }
        }
        let out = Rc::new(out);
        let saved = Rc::clone(&out);
        let backward = Box::new(move |up: &[f32]| {
            let mut g = vec![0.0f32; up.len()];
            for ((grow, urow), yrow) in g
                .chunks_mut(cols)
                .zip(up.chunks(cols))
                .zip(saved.chunks(cols))
            {
                let dot: f32 = urow.iter().zip(yrow).map(|(u, y)| u * y).sum();
                for ((gv, &u), &y) in grow.iter_mut().zip(urow).zip(yrow) {
                    *gv = y * (u - dot);
                }
            }
            vec![Some(g)]
        });
        op_output(self.shape().to_vec(), out, vec![self.clone()], backward)
    }

    /// GELU with the tanh approximation 0.5x(1 + tanh(√(2/π)(x + 0.044715x³))).
    pub fn gelu(&self) -> Tensor {
        let src = self.data_rc();
        let out: Vec<f32> = src
            .iter()
            .map(|&x| {
                let t = (GELU_SCALE * (x + GELU_COEF * x * x * x)).tanh();
                0.5 * x * (1.0 + t)
            })
            .collect();
        let saved = Rc::clone(&src);
        let backward = Box::new(move |up: &[f32]| {
            let g = up
                .iter()
                .zip(saved.iter())
                .map(|(&u, &x)| {
                    let inner = GELU_SCALE * (x + GELU_COEF * x * x * x);
                    let t = inner.tanh();
                    let dinner = GELU_SCALE * (1.0 + 3.0 * GELU_COEF * x * x);
                    u * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner)
                })
                .collect();
            vec![Some(g)]
        });
        op_output(self.shape().to_vec(), Rc::new(out), vec![self.clone()], backward)
    }

    /// Layer normalization over the last axis followed by the affine map
    /// `gamma * x̂ + beta`.
    pub fn layer_norm(&self, gamma: &Tensor, beta: &Tensor, eps: f32) -> Result<Tensor, TensorError> {
        let d = *self.shape().last().expect("rank >= 1");
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm",
                left: self.shape().to_vec(),
                right: gamma.shape().to_vec(),
            });
        }
        let rows = self.numel() / d;
        let src = self.data();
        let g = gamma.data_rc();
        let b = beta.data();
        let mut out = vec![0.0f32; src.len()];
        let mut normalized = vec![0.0f32; src.len()];
        let mut inv_std = vec![0.0f32; rows];
        for r in 0..rows {
            let row = &src[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f32>() / d as f32;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f32>() / d as f32;
            let istd = 1.0 / (var + eps).sqrt();
            inv_std[r] = istd;
            for j in 0..d {
                let xhat = (row[j] - mean) * istd;
                normalized[r * d + j] = xhat;
                out[r * d + j] = g[j] * xhat + b[j];
            }
        }
        let normalized = Rc::new(normalized);
        let need = (self.is_tracked(), gamma.is_tracked(), beta.is_tracked());
        let backward = Box::new(move |up: &[f32]| {
            let mut dx = need.0.then(|| vec![0.0f32; up.len()]);
            let mut dgamma = need.1.then(|| vec![0.0f32; d]);
            let mut dbeta = need.2.then(|| vec![0.0f32; d]);
            for r in 0..rows {
                let urow = &up[r * d..(r + 1) * d];
                let xrow = &normalized[r * d..(r + 1) * d];
                if let Some(dg) = dgamma.as_mut() {
                    for j in 0..d {
                        dg[j] += urow[j] * xrow[j];
                    }
                }
                if let Some(db) = dbeta.as_mut() {
                    for j in 0..d {
                        db[j] += urow[j];
                    }
                }
                if let Some(dx) = dx.as_mut() {
                    // dL/dx̂ = up ⊙ gamma; project out the mean and the
                    // component along x̂ (the variance direction)
                    let mut sum_g = 0.0f32;
                    let mut sum_gx = 0.0f32;
                    for j in 0..d {
                        let gj = urow[j] * g[j];
                        sum_g += gj;
                        sum_gx += gj * xrow[j];
                    }
                    let mean_g = sum_g / d as f32;
                    let mean_gx = sum_gx / d as f32;
                    for j in 0..d {
                        let gj = urow[j] * g[j];
                        dx[r * d + j] = inv_std[r] * (gj - mean_g - xrow[j] * mean_gx);
                    }
                }
            }
            vec![dx, dgamma, dbeta]
        });
        Ok(op_output(
            self.shape().to_vec(),
            Rc::new(out),
            vec![self.clone(), gamma.clone(), beta.clone()],
            backward,
        ))
    }

    /// Inverted dropout. In train mode each element is zeroed with
    /// probability `p` and survivors are scaled by 1/(1-p); in eval mode (or
    /// with p = 0) the input is returned untouched.
    pub fn dropout<R: Rng>(&self, p: f32, train: bool, rng: &mut R) -> Result<Tensor, TensorError> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidDropout { p });
        }
        if !train || p == 0.0 {
            return Ok(self.clone());
        }
        let keep_scale = 1.0 / (1.0 - p);
        let mask: Rc<Vec<f32>> = Rc::new(
            (0..self.numel())
                .map(|_| if rng.random::<f32>() < p { 0.0 } else { keep_scale })
                .collect(),
        );
        let out: Vec<f32> = self
            .data()
            .iter()
            .zip(mask.iter())
            .map(|(x, m)| x * m)
            .collect();
        let saved = Rc::clone(&mask);
        let backward = Box::new(move |up: &[f32]| {
            vec![Some(
                up.iter().zip(saved.iter()).map(|(u, m)| u * m).collect(),
            )]
        });
        Ok(op_output(self.shape().to_vec(), Rc::new(out), vec![self.clone()], backward))
    }

    /// Sum of all elements, as a scalar tensor.
    pub fn sum_all(&self) -> Tensor {
        let total: f32 = self.data().iter().sum();
        let n = self.numel();
        let backward = Box::new(move |up: &[f32]| vec![Some(vec![up[0]; n])]);
        op_output(vec![1], Rc::new(vec![total]), vec![self.clone()], backward)
    }

    /// Mean of all elements, as a scalar tensor.
    pub fn mean_all(&self) -> Tensor {
        let n = self.numel();
        let total: f32 = self.data().iter().sum();
        let backward = Box::new(move |up: &[f32]| vec![Some(vec![up[0] / n as f32; n])]);
        op_output(
            vec![1],
            Rc::new(vec![total / n as f32]),
            vec![self.clone()],
            backward,
        )
    }

    /// Mean over the last axis; the reduced axis keeps size 1.
    pub fn mean_last(&self) -> Tensor {
        let d = *self.shape().last().expect("rank >= 1");
        let rows = self.numel() / d;
        let out: Vec<f32> = self
            .data()
            .chunks(d)
            .map(|row| row.iter().sum::<f32>() / d as f32)
            .collect();
        let mut shape = self.shape().to_vec();
        *shape.last_mut().unwrap() = 1;
        let backward = Box::new(move |up: &[f32]| {
            let mut g = vec![0.0f32; rows * d];
            for (r, &u) in up.iter().enumerate() {
                let v = u / d as f32;
                for gv in &mut g[r * d..(r + 1) * d] {
                    *gv = v;
                }
            }
            vec![Some(g)]
        });
        op_output(shape, Rc::new(out), vec![self.clone()], backward)
    }

    /// Biased variance over the last axis; the reduced axis keeps size 1.
    pub fn var_last(&self) -> Tensor {
        let d = *self.shape().last().expect("rank >= 1");
        let rows = self.numel() / d;
        let src = self.data_rc();
        let mut out = Vec::with_capacity(rows);
        let mut centered = vec![0.0f32; src.len()];
        for r in 0..rows {
            let row = &src[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f32>() / d as f32;
            let mut var = 0.0f32;
            for j in 0..d {
                let c = row[j] - mean;
                centered[r * d + j] = c;
                var += c * c;
            }
            out.push(var / d as f32);
        }
        let mut shape = self.shape().to_vec();
        *shape.last_mut().unwrap() = 1;
        let centered = Rc::new(centered);
        let backward = Box::new(move |up: &[f32]| {
            let mut g = vec![0.0f32; rows * d];
            for (r, &u) in up.iter().enumerate() {
                let scale = u * 2.0 / d as f32;
                for j in 0..d {
                    g[r * d + j] = scale * centered[r * d + j];
                }
            }
            vec![Some(g)]
        });
        op_output(shape, Rc::new(out), vec![self.clone()], backward)
    }

    /// Gather rows of a rank-2 table; gradients scatter-add back.
    pub fn index_select(&self, indices: &[usize]) -> Result<Tensor, TensorError> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(TensorError::InvalidShape {
                shape: s.to_vec(),
                reason: "index_select needs a rank-2 table".into(),
            });
        }
        let (rows, d) = (s[0], s[1]);
        for &i in indices {
            if i >= rows {
                return Err(TensorError::IndexOutOfRange { index: i, rows });
            }
        }
        let src = self.data();
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            out.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let idx: Vec<usize> = indices.to_vec();
        let table_len = self.numel();
        let backward = Box::new(move |up: &[f32]| {
            let mut g = vec![0.0f32; table_len];
            for (k, &i) in idx.iter().enumerate() {
                for j in 0..d {
                    g[i * d + j] += up[k * d + j];
                }
            }
            vec![Some(g)]
        });
        Ok(op_output(
            vec![indices.len(), d],
            Rc::new(out),
            vec![self.clone()],
            backward,
        ))
    }
}

/// Mean cross-entropy of logits `[B, C]` against integer labels, computed
/// through log-sum-exp so huge logits cannot overflow.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<Tensor, TensorError> {
    let s = logits.shape();
    if s.len() != 2 || s[0] != labels.len() {
        return Err(TensorError::ShapeMismatch {
            op: "cross_entropy",
            left: s.to_vec(),
            right: vec![labels.len()],
        });
    }
    let (batch, classes) = (s[0], s[1]);
    for &l in labels {
        if l >= classes {
            return Err(TensorError::LabelOutOfRange {
                label: l,
                classes,
            });
        }
    }
    let src = logits.data();
    let mut probs = vec![0.0f32; src.len()];
    let mut loss = 0.0f64;
    for (b, &label) in labels.iter().enumerate() {
        let row = &src[b * classes..(b + 1) * classes];
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for (j, &x) in row.iter().enumerate() {
            let e = (x - max).exp();
            probs[b * classes + j] = e;
            sum += e;
        }
        let inv = 1.0 / sum;
        for p in &mut probs[b * classes..(b + 1) * classes] {
            *p *= inv;
        }
        let lse = max + sum.ln();
        loss += f64::from(lse - row[label]);
    }
    let mean = (loss / batch as f64) as f32;
    let probs = Rc::new(probs);
    let labels_b: Vec<usize> = labels.to_vec();
    let backward = Box::new(move |up: &[f32]| {
        let scale = up[0] / batch as f32;
        let mut g = vec![0.0f32; probs.len()];
        for (b, &label) in labels_b.iter().enumerate() {
            for j in 0..classes {
                let indicator = if j == label { 1.0 } else { 0.0 };
                g[b * classes + j] = scale * (probs[b * classes + j] - indicator);
            }
        }
        vec![Some(g)]
    });
    Ok(op_output(
        vec![1],
        Rc::new(vec![mean]),
        vec![logits.clone()],
        backward,
    ))
}
