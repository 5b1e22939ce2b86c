//! Tensor operations and their backward rules.
//!
//! Each op validates shapes up front, computes the forward value, and
//! registers a closure that maps the output gradient to per-parent
//! contributions. Ops only ever see finite-dimensional dense data; there
//! is no implicit broadcasting beyond what the model needs (a trailing
//! suffix broadcast for bias/PE addition).

use rand::Rng;

use super::{strides, Element, Node, Tensor};
use crate::error::{Error, Result};

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

/// Sums `data` (shape `leading ++ suffix`) over the leading dims.
fn sum_over_leading<T: Element>(data: &[T], suffix_len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); suffix_len];
    for chunk in data.chunks_exact(suffix_len) {
        for (o, &v) in out.iter_mut().zip(chunk) {
            *o = *o + v;
        }
    }
    out
}

impl<T: Element> Tensor<T> {
    // ---- elementwise -------------------------------------------------

    /// Elementwise sum. `rhs` may have a shape equal to a trailing suffix
    /// of `self`'s shape, in which case it is tiled over the leading dims
    /// (bias and positional-table addition).
    pub fn add(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        let ls = self.shape();
        let rs = rhs.shape();
        if !(ls == rs || (rs.len() < ls.len() && ls[ls.len() - rs.len()..] == *rs)) {
            return Err(shape_err("add", ls, rs));
        }
        let suffix: usize = rs.iter().product();
        let data: Vec<T> = self
            .data()
            .iter()
            .enumerate()
            .map(|(i, &a)| a + rhs.data()[i % suffix])
            .collect();
        Ok(Tensor::from_op(
            ls.to_vec(),
            data,
            vec![self.clone(), rhs.clone()],
            Box::new(move |node: &Node<T>, g: &[T]| {
                let d_rhs = if node.parents[1].numel() == g.len() {
                    g.to_vec()
                } else {
                    sum_over_leading(g, suffix)
                };
                vec![Some(g.to_vec()), Some(d_rhs)]
            }),
        ))
    }

    pub fn sub(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        if self.shape() != rhs.shape() {
            return Err(shape_err("sub", self.shape(), rhs.shape()));
        }
        let data: Vec<T> = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), rhs.clone()],
            Box::new(|_, g| {
                vec![
                    Some(g.to_vec()),
                    Some(g.iter().map(|&v| T::zero() - v).collect()),
                ]
            }),
        ))
    }

    pub fn mul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        if self.shape() != rhs.shape() {
            return Err(shape_err("mul", self.shape(), rhs.shape()));
        }
        let data: Vec<T> = self
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), rhs.clone()],
            Box::new(|node: &Node<T>, g: &[T]| {
                let a = node.parents[0].data();
                let b = node.parents[1].data();
                vec![
                    Some(g.iter().zip(b).map(|(&gv, &bv)| gv * bv).collect()),
                    Some(g.iter().zip(a).map(|(&gv, &av)| gv * av).collect()),
                ]
            }),
        ))
    }

    pub fn scale(&self, c: T) -> Tensor<T> {
        let data: Vec<T> = self.data().iter().map(|&v| v * c).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |_, g| vec![Some(g.iter().map(|&v| v * c).collect())]),
        )
    }

    pub fn relu(&self) -> Tensor<T> {
        let data: Vec<T> = self
            .data()
            .iter()
            .map(|&v| if v > T::zero() { v } else { T::zero() })
            .collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(|node: &Node<T>, g: &[T]| {
                let x = node.parents[0].data();
                vec![Some(
                    g.iter()
                        .zip(x)
                        .map(|(&gv, &xv)| if xv > T::zero() { gv } else { T::zero() })
                        .collect(),
                )]
            }),
        )
    }

    /// GELU, tanh approximation.
    pub fn gelu(&self) -> Tensor<T> {
        let c = T::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
        let a = T::from_f64(0.044_715);
        let half = T::from_f64(0.5);
        let data: Vec<T> = self
            .data()
            .iter()
            .map(|&x| {
                let u = c * (x + a * x * x * x);
                half * x * (T::one() + u.tanh())
            })
            .collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |node: &Node<T>, g: &[T]| {
                let x = node.parents[0].data();
                let three = T::from_f64(3.0);
                vec![Some(
                    g.iter()
                        .zip(x)
                        .map(|(&gv, &xv)| {
                            let u = c * (xv + a * xv * xv * xv);
                            let t = u.tanh();
                            let du = c * (T::one() + three * a * xv * xv);
                            gv * (half * (T::one() + t)
                                + half * xv * (T::one() - t * t) * du)
                        })
                        .collect(),
                )]
            }),
        )
    }

    // ---- shape manipulation ------------------------------------------

    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<T>> {
        if new_shape.iter().product::<usize>() != self.numel() {
            return Err(shape_err("reshape", self.shape(), new_shape));
        }
        Ok(Tensor::from_op(
            new_shape.to_vec(),
            self.data().to_vec(),
            vec![self.clone()],
            Box::new(|_, g| vec![Some(g.to_vec())]),
        ))
    }

    /// Swaps two axes, materializing the permuted layout.
    pub fn transpose(&self, a: usize, b: usize) -> Result<Tensor<T>> {
        let rank = self.shape().len();
        if a >= rank || b >= rank {
            return Err(Error::InvalidParameter {
                op: "transpose",
                message: format!("axes ({a},{b}) out of range for rank {rank}"),
            });
        }
        let mut out_shape = self.shape().to_vec();
        out_shape.swap(a, b);
        let data = permute_swap(self.data(), self.shape(), a, b);
        Ok(Tensor::from_op(
            out_shape.clone(),
            data,
            vec![self.clone()],
            Box::new(move |_, g| vec![Some(permute_swap(g, &out_shape, a, b))]),
        ))
    }

    pub fn concat(parts: &[Tensor<T>], axis: usize) -> Result<Tensor<T>> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter {
                op: "concat",
                message: "no tensors given".into(),
            });
        }
        let rank = parts[0].shape().len();
        if axis >= rank {
            return Err(Error::InvalidParameter {
                op: "concat",
                message: format!("axis {axis} out of range for rank {rank}"),
            });
        }
        let mut axis_total = 0;
        for p in parts {
            if p.shape().len() != rank {
                return Err(shape_err("concat", parts[0].shape(), p.shape()));
            }
            for (d, (&a, &b)) in parts[0].shape().iter().zip(p.shape()).enumerate() {
                if d != axis && a != b {
                    return Err(shape_err("concat", parts[0].shape(), p.shape()));
                }
            }
            axis_total += p.shape()[axis];
        }
        let mut out_shape = parts[0].shape().to_vec();
        out_shape[axis] = axis_total;
        let outer: usize = out_shape[..axis].iter().product();
        let inner: usize = out_shape[axis + 1..].iter().product();

        let mut data = vec![T::zero(); out_shape.iter().product()];
        let mut offset = 0;
        let mut sizes = Vec::with_capacity(parts.len());
        for p in parts {
            let len = p.shape()[axis];
            sizes.push(len);
            for o in 0..outer {
                let src = &p.data()[o * len * inner..(o + 1) * len * inner];
                let dst_start = o * axis_total * inner + offset * inner;
                data[dst_start..dst_start + len * inner].copy_from_slice(src);
            }
            offset += len;
        }
        Ok(Tensor::from_op(
            out_shape,
            data,
            parts.to_vec(),
            Box::new(move |_, g| {
                let mut out = Vec::with_capacity(sizes.len());
                let mut off = 0;
                for &len in &sizes {
                    let mut dg = vec![T::zero(); outer * len * inner];
                    for o in 0..outer {
                        let src_start = o * axis_total * inner + off * inner;
                        dg[o * len * inner..(o + 1) * len * inner]
                            .copy_from_slice(&g[src_start..src_start + len * inner]);
                    }
                    out.push(Some(dg));
                    off += len;
                }
                out
            }),
        ))
    }

    /// Tiles `self` over new leading dimensions.
    pub fn broadcast_suffix(&self, leading: &[usize]) -> Tensor<T> {
        let reps: usize = leading.iter().product();
        let mut out_shape = leading.to_vec();
        out_shape.extend_from_slice(self.shape());
        let n = self.numel();
        let mut data = Vec::with_capacity(reps * n);
        for _ in 0..reps {
            data.extend_from_slice(self.data());
        }
        Tensor::from_op(
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |_, g| vec![Some(sum_over_leading(g, n))]),
        )
    }

    // ---- gather / scatter ---------------------------------------------

    /// Selects slices along `axis` at the given indices (shared across
    /// all other dims). Repeated indices are allowed; gradients
    /// scatter-add back.
    pub fn gather_rows(&self, axis: usize, indices: &[usize]) -> Result<Tensor<T>> {
        let rank = self.shape().len();
        if axis >= rank {
            return Err(Error::InvalidParameter {
                op: "gather_rows",
                message: format!("axis {axis} out of range for rank {rank}"),
            });
        }
        let axis_len = self.shape()[axis];
        for &i in indices {
            if i >= axis_len {
                return Err(Error::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    len: axis_len,
                });
            }
        }
        let outer: usize = self.shape()[..axis].iter().product();
        let inner: usize = self.shape()[axis + 1..].iter().product();
        let mut out_shape = self.shape().to_vec();
        out_shape[axis] = indices.len();
        let mut data = vec![T::zero(); outer * indices.len() * inner];
        for o in 0..outer {
            for (j, &i) in indices.iter().enumerate() {
                let src = o * axis_len * inner + i * inner;
                let dst = o * indices.len() * inner + j * inner;
                data[dst..dst + inner].copy_from_slice(&self.data()[src..src + inner]);
            }
        }
        let idx = indices.to_vec();
        let in_shape = self.shape().to_vec();
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |_, g| {
                let mut dx = vec![T::zero(); in_shape.iter().product()];
                for o in 0..outer {
                    for (j, &i) in idx.iter().enumerate() {
                        let dst = o * axis_len * inner + i * inner;
                        let src = o * idx.len() * inner + j * inner;
                        for t in 0..inner {
                            dx[dst + t] = dx[dst + t] + g[src + t];
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Writes `self`'s slices along `axis` into a zero tensor whose axis
    /// length is `out_len`, at the given (distinct) positions.
    pub fn scatter_rows(&self, axis: usize, indices: &[usize], out_len: usize) -> Result<Tensor<T>> {
        let rank = self.shape().len();
        if axis >= rank {
            return Err(Error::InvalidParameter {
                op: "scatter_rows",
                message: format!("axis {axis} out of range for rank {rank}"),
            });
        }
        if self.shape()[axis] != indices.len() {
            return Err(Error::InvalidParameter {
                op: "scatter_rows",
                message: format!(
                    "axis length {} does not match {} indices",
                    self.shape()[axis],
                    indices.len()
                ),
            });
        }
        let mut seen = vec![false; out_len];
        for &i in indices {
            if i >= out_len {
                return Err(Error::IndexOutOfRange {
                    op: "scatter_rows",
                    index: i,
                    len: out_len,
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter {
                    op: "scatter_rows",
                    message: format!("duplicate index {i}"),
                });
            }
        }
        let outer: usize = self.shape()[..axis].iter().product();
        let inner: usize = self.shape()[axis + 1..].iter().product();
        let n_idx = indices.len();
        let mut out_shape = self.shape().to_vec();
        out_shape[axis] = out_len;
        let mut data = vec![T::zero(); outer * out_len * inner];
        for o in 0..outer {
            for (j, &i) in indices.iter().enumerate() {
                let src = o * n_idx * inner + j * inner;
                let dst = o * out_len * inner + i * inner;
                data[dst..dst + inner].copy_from_slice(&self.data()[src..src + inner]);
            }
        }
        let idx = indices.to_vec();
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |_, g| {
                let mut dx = vec![T::zero(); outer * n_idx * inner];
                for o in 0..outer {
                    for (j, &i) in idx.iter().enumerate() {
                        let src = o * out_len * inner + i * inner;
                        let dst = o * n_idx * inner + j * inner;
                        dx[dst..dst + inner].copy_from_slice(&g[src..src + inner]);
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    // ---- matmul ---------------------------------------------------------

    /// Batched matrix product. The trailing two dims are the matrix dims;
    /// leading batch dims must match exactly, or `rhs` may be a plain
    /// matrix shared across the batch.
    pub fn matmul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        let (ls, rs) = (self.shape(), rhs.shape());
        if ls.len() < 2 || rs.len() < 2 {
            return Err(shape_err("matmul", ls, rs));
        }
        let (p, q) = (ls[ls.len() - 2], ls[ls.len() - 1]);
        let (q2, r) = (rs[rs.len() - 2], rs[rs.len() - 1]);
        let rhs_batched = rs.len() > 2;
        if q != q2 || (rhs_batched && ls[..ls.len() - 2] != rs[..rs.len() - 2]) {
            return Err(shape_err("matmul", ls, rs));
        }
        let nbatch: usize = ls[..ls.len() - 2].iter().product();
        let mut out_shape = ls[..ls.len() - 2].to_vec();
        out_shape.push(p);
        out_shape.push(r);

        let mut data = vec![T::zero(); nbatch * p * r];
        for bi in 0..nbatch {
            let a = &self.data()[bi * p * q..];
            let b = if rhs_batched {
                &rhs.data()[bi * q * r..]
            } else {
                rhs.data()
            };
            T::gemm(
                p, q, r,
                T::one(),
                a.as_ptr(), q as isize, 1,
                b.as_ptr(), r as isize, 1,
                T::zero(),
                data[bi * p * r..].as_mut_ptr(),
            );
        }
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone(), rhs.clone()],
            Box::new(move |node: &Node<T>, g: &[T]| {
                let a_full = node.parents[0].data();
                let b_full = node.parents[1].data();
                let mut da = vec![T::zero(); a_full.len()];
                let mut db = vec![T::zero(); b_full.len()];
                for bi in 0..nbatch {
                    let gb = &g[bi * p * r..];
                    let a = &a_full[bi * p * q..];
                    let b = if rhs_batched { &b_full[bi * q * r..] } else { b_full };
                    // dA = g . B^T  (B^T viewed via strides)
                    T::gemm(
                        p, r, q,
                        T::one(),
                        gb.as_ptr(), r as isize, 1,
                        b.as_ptr(), 1, r as isize,
                        T::one(),
                        da[bi * p * q..].as_mut_ptr(),
                    );
                    // dB += A^T . g
                    let db_off = if rhs_batched { bi * q * r } else { 0 };
                    T::gemm(
                        q, p, r,
                        T::one(),
                        a.as_ptr(), 1, q as isize,
                        gb.as_ptr(), r as isize, 1,
                        T::one(),
                        db[db_off..].as_mut_ptr(),
                    );
                }
                vec![Some(da), Some(db)]
            }),
        ))
    }

    /// Batched `A . B^T` without materializing the transpose; `rhs` has
    /// shape `[.., r, q]`. Used by attention score computation.
    pub fn matmul_nt(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        let (ls, rs) = (self.shape(), rhs.shape());
        if ls.len() < 2 || rs.len() != ls.len() {
            return Err(shape_err("matmul_nt", ls, rs));
        }
        let (p, q) = (ls[ls.len() - 2], ls[ls.len() - 1]);
        let (r, q2) = (rs[rs.len() - 2], rs[rs.len() - 1]);
        if q != q2 || ls[..ls.len() - 2] != rs[..rs.len() - 2] {
            return Err(shape_err("matmul_nt", ls, rs));
        }
        let nbatch: usize = ls[..ls.len() - 2].iter().product();
        let mut out_shape = ls[..ls.len() - 2].to_vec();
        out_shape.push(p);
        out_shape.push(r);

        let mut data = vec![T::zero(); nbatch * p * r];
        for bi in 0..nbatch {
            let a = &self.data()[bi * p * q..];
            let b = &rhs.data()[bi * r * q..];
            T::gemm(
                p, q, r,
                T::one(),
                a.as_ptr(), q as isize, 1,
                b.as_ptr(), 1, q as isize,
                T::zero(),
                data[bi * p * r..].as_mut_ptr(),
            );
        }
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone(), rhs.clone()],
            Box::new(move |node: &Node<T>, g: &[T]| {
                let a_full = node.parents[0].data();
                let b_full = node.parents[1].data();
                let mut da = vec![T::zero(); a_full.len()];
                let mut db = vec![T::zero(); b_full.len()];
                for bi in 0..nbatch {
                    let gb = &g[bi * p * r..];
                    let a = &a_full[bi * p * q..];
                    let b = &b_full[bi * r * q..];
                    // dA = g . B
                    T::gemm(
                        p, r, q,
                        T::one(),
                        gb.as_ptr(), r as isize, 1,
                        b.as_ptr(), q as isize, 1,
                        T::one(),
                        da[bi * p * q..].as_mut_ptr(),
                    );
                    // dB = g^T . A
                    T::gemm(
                        r, p, q,
                        T::one(),
                        gb.as_ptr(), 1, r as isize,
                        a.as_ptr(), q as isize, 1,
                        T::one(),
                        db[bi * r * q..].as_mut_ptr(),
                    );
                }
                vec![Some(da), Some(db)]
            }),
        ))
    }

    // ---- normalization and attention pieces ------------------------------

    /// Numerically stabilized softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<T>> {
        let rank = self.shape().len();
        if axis >= rank {
            return Err(Error::InvalidParameter {
                op: "softmax",
                message: format!("axis {axis} out of range for rank {rank}"),
            });
        }
        let axis_len = self.shape()[axis];
        let inner: usize = self.shape()[axis + 1..].iter().product();
        let outer: usize = self.shape()[..axis].iter().product();
        let mut data = vec![T::zero(); self.numel()];
        let x = self.data();
        for o in 0..outer {
            for i in 0..inner {
                let base = o * axis_len * inner + i;
                let mut max = T::neg_infinity();
                let mut finite = true;
                for k in 0..axis_len {
                    let v = x[base + k * inner];
                    if !v.is_finite() {
                        finite = false;
                    }
                    if v > max {
                        max = v;
                    }
                }
                if !finite {
                    return Err(Error::Numeric {
                        op: "softmax",
                        message: "non-finite input".into(),
                    });
                }
                let mut sum = T::zero();
                for k in 0..axis_len {
                    let e = (x[base + k * inner] - max).exp();
                    data[base + k * inner] = e;
                    sum = sum + e;
                }
                for k in 0..axis_len {
                    data[base + k * inner] = data[base + k * inner] / sum;
                }
            }
        }
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |node: &Node<T>, g: &[T]| {
                let y = &node.data;
                let mut dx = vec![T::zero(); g.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * axis_len * inner + i;
                        let mut dot = T::zero();
                        for k in 0..axis_len {
                            let off = base + k * inner;
                            dot = dot + g[off] * y[off];
                        }
                        for k in 0..axis_len {
                            let off = base + k * inner;
                            dx[off] = y[off] * (g[off] - dot);
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Layer normalization over the last axis followed by the affine map
    /// `gamma * xhat + beta`.
    pub fn layer_norm(&self, gamma: &Tensor<T>, beta: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
        let d = *self.shape().last().ok_or_else(|| Error::InvalidParameter {
            op: "layer_norm",
            message: "rank-0 input".into(),
        })?;
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(shape_err("layer_norm", self.shape(), gamma.shape()));
        }
        if eps <= 0.0 {
            return Err(Error::InvalidParameter {
                op: "layer_norm",
                message: format!("eps must be positive, got {eps}"),
            });
        }
        let eps = T::from_f64(eps);
        let n_slices = self.numel() / d;
        let x = self.data();
        let gm = gamma.data();
        let bt = beta.data();
        let mut data = vec![T::zero(); self.numel()];
        let mut means = vec![T::zero(); n_slices];
        let mut inv_stds = vec![T::zero(); n_slices];
        let dn = T::from_f64(d as f64);
        for s in 0..n_slices {
            let xs = &x[s * d..(s + 1) * d];
            let mean = xs.iter().copied().sum::<T>() / dn;
            let var = xs
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .sum::<T>()
                / dn;
            let inv_std = T::one() / (var + eps).sqrt();
            means[s] = mean;
            inv_stds[s] = inv_std;
            for j in 0..d {
                let xhat = (xs[j] - mean) * inv_std;
                data[s * d + j] = gm[j] * xhat + bt[j];
            }
        }
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |node: &Node<T>, g: &[T]| {
                let x = node.parents[0].data();
                let gm = node.parents[1].data();
                let mut dx = vec![T::zero(); x.len()];
                let mut dgamma = vec![T::zero(); d];
                let mut dbeta = vec![T::zero(); d];
                for s in 0..n_slices {
                    let xs = &x[s * d..(s + 1) * d];
                    let gs = &g[s * d..(s + 1) * d];
                    let mean = means[s];
                    let inv_std = inv_stds[s];
                    let mut sum_dxhat = T::zero();
                    let mut sum_dxhat_xhat = T::zero();
                    for j in 0..d {
                        let xhat = (xs[j] - mean) * inv_std;
                        let dxhat = gs[j] * gm[j];
                        dgamma[j] = dgamma[j] + gs[j] * xhat;
                        dbeta[j] = dbeta[j] + gs[j];
                        sum_dxhat = sum_dxhat + dxhat;
                        sum_dxhat_xhat = sum_dxhat_xhat + dxhat * xhat;
                    }
                    let m_dxhat = sum_dxhat / dn;
                    let m_dxhat_xhat = sum_dxhat_xhat / dn;
                    for j in 0..d {
                        let xhat = (xs[j] - mean) * inv_std;
                        let dxhat = gs[j] * gm[j];
                        dx[s * d + j] = (dxhat - m_dxhat - xhat * m_dxhat_xhat) * inv_std;
                    }
                }
                vec![Some(dx), Some(dgamma), Some(dbeta)]
            }),
        ))
    }

    // ---- convolution ----------------------------------------------------

    /// 1-D cross-correlation along the time axis with zero padding.
    /// `self`: `[B, L, m]`, `kernel`: `[k, m, d]`, `bias`: `[d]`.
    pub fn conv1d(
        &self,
        kernel: &Tensor<T>,
        bias: &Tensor<T>,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor<T>> {
        let xs = self.shape();
        let ks = kernel.shape();
        if xs.len() != 3 || ks.len() != 3 || xs[2] != ks[1] {
            return Err(shape_err("conv1d", xs, ks));
        }
        let (batch, len, ch) = (xs[0], xs[1], xs[2]);
        let (k, d) = (ks[0], ks[2]);
        if bias.shape() != [d] {
            return Err(shape_err("conv1d", bias.shape(), &[d]));
        }
        if stride == 0 {
            return Err(Error::InvalidParameter {
                op: "conv1d",
                message: "stride must be positive".into(),
            });
        }
        let span = len + 2 * padding;
        if span < k || (span - k) % stride != 0 {
            return Err(Error::ShapeMismatch {
                op: "conv1d output length",
                lhs: xs.to_vec(),
                rhs: ks.to_vec(),
            });
        }
        let out_len = (span - k) / stride + 1;
        let mut data = vec![T::zero(); batch * out_len * d];
        let x = self.data();
        let w = kernel.data();
        let b = bias.data();
        for bi in 0..batch {
            for t in 0..out_len {
                let out_base = (bi * out_len + t) * d;
                data[out_base..out_base + d].copy_from_slice(b);
                for j in 0..k {
                    let src = (t * stride + j) as isize - padding as isize;
                    if src < 0 || src as usize >= len {
                        continue;
                    }
                    let x_base = (bi * len + src as usize) * ch;
                    for c in 0..ch {
                        let xv = x[x_base + c];
                        let w_base = (j * ch + c) * d;
                        for o in 0..d {
                            data[out_base + o] = data[out_base + o] + xv * w[w_base + o];
                        }
                    }
                }
            }
        }
        Ok(Tensor::from_op(
            vec![batch, out_len, d],
            data,
            vec![self.clone(), kernel.clone(), bias.clone()],
            Box::new(move |node: &Node<T>, g: &[T]| {
                let x = node.parents[0].data();
                let w = node.parents[1].data();
                let mut dx = vec![T::zero(); x.len()];
                let mut dw = vec![T::zero(); w.len()];
                let mut db = vec![T::zero(); d];
                for bi in 0..batch {
                    for t in 0..out_len {
                        let g_base = (bi * out_len + t) * d;
                        for o in 0..d {
                            db[o] = db[o] + g[g_base + o];
                        }
                        for j in 0..k {
                            let src = (t * stride + j) as isize - padding as isize;
                            if src < 0 || src as usize >= len {
                                continue;
                            }
                            let x_base = (bi * len + src as usize) * ch;
                            for c in 0..ch {
                                let w_base = (j * ch + c) * d;
                                let mut acc = T::zero();
                                for o in 0..d {
                                    let gv = g[g_base + o];
                                    acc = acc + gv * w[w_base + o];
                                    dw[w_base + o] = dw[w_base + o] + gv * x[x_base + c];
                                }
                                dx[x_base + c] = dx[x_base + c] + acc;
                            }
                        }
                    }
                }
                vec![Some(dx), Some(dw), Some(db)]
            }),
        ))
    }

    // ---- stochastic -------------------------------------------------------

    /// Inverted dropout: zeroes elements with probability `p` during
    /// training and scales survivors by `1/(1-p)`; identity in inference.
    pub fn dropout<R: Rng>(&self, p: f64, training: bool, rng: &mut R) -> Result<Tensor<T>> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                op: "dropout",
                message: format!("p must be in [0, 1), got {p}"),
            });
        }
        if !training || p == 0.0 {
            return Ok(Tensor::from_op(
                self.shape().to_vec(),
                self.data().to_vec(),
                vec![self.clone()],
                Box::new(|_, g| vec![Some(g.to_vec())]),
            ));
        }
        let keep_scale = T::from_f64(1.0 / (1.0 - p));
        let mult: Vec<T> = (0..self.numel())
            .map(|_| {
                if rng.gen::<f64>() < p {
                    T::zero()
                } else {
                    keep_scale
                }
            })
            .collect();
        let data: Vec<T> = self
            .data()
            .iter()
            .zip(&mult)
            .map(|(&v, &m)| v * m)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |_, g| {
                vec![Some(g.iter().zip(&mult).map(|(&gv, &m)| gv * m).collect())]
            }),
        ))
    }

    // ---- reductions --------------------------------------------------------

    pub fn reduce_sum(&self) -> Tensor<T> {
        let s: T = self.data().iter().copied().sum();
        Tensor::from_op(
            vec![1],
            vec![s],
            vec![self.clone()],
            Box::new(|node: &Node<T>, g: &[T]| {
                vec![Some(vec![g[0]; node.parents[0].numel()])]
            }),
        )
    }

    pub fn reduce_mean(&self) -> Tensor<T> {
        let n = T::from_f64(self.numel() as f64);
        let s: T = self.data().iter().copied().sum();
        Tensor::from_op(
            vec![1],
            vec![s / n],
            vec![self.clone()],
            Box::new(move |node: &Node<T>, g: &[T]| {
                vec![Some(vec![g[0] / n; node.parents[0].numel()])]
            }),
        )
    }
}

/// Copies `data` (of `shape`) with axes `a` and `b` swapped, without
/// per-element div/mod: an odometer walks the output index space while an
/// input offset advances by permuted strides.
fn permute_swap<T: Element>(data: &[T], shape: &[usize], a: usize, b: usize) -> Vec<T> {
    if a == b {
        return data.to_vec();
    }
    let in_strides = strides(shape);
    let mut out_shape = shape.to_vec();
    out_shape.swap(a, b);
    let mut perm_strides = in_strides.clone();
    perm_strides.swap(a, b);

    let rank = shape.len();
    let mut out = vec![T::zero(); data.len()];
    let mut idx = vec![0usize; rank];
    let mut in_off = 0usize;
    for slot in out.iter_mut() {
        *slot = data[in_off];
        // odometer increment, updating the input offset incrementally
        for dim in (0..rank).rev() {
            idx[dim] += 1;
            in_off += perm_strides[dim];
            if idx[dim] < out_shape[dim] {
                break;
            }
            in_off -= perm_strides[dim] * out_shape[dim];
            idx[dim] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t64(data: Vec<f64>, shape: &[usize]) -> Tensor<f64> {
        Tensor::constant(data, shape).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let eye = t64(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]);
        let m = t64(vec![3.0, -1.0, 2.5, 7.0], &[2, 2]);
        let out = eye.matmul(&m).unwrap();
        assert_eq!(out.data(), m.data());
    }

    #[test]
    fn matmul_hand_example() {
        let a = t64(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]);
        let b = t64(vec![5.0, 6.0], &[2, 1]);
        let out = a.matmul(&b).unwrap();
        assert_eq!(out.shape(), &[2, 1]);
        assert_eq!(out.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_gradient_matches_hand_value() {
        // d sum(A.B) / dA at B = [[2,3],[4,5]] is [[5,9],[5,9]]
        let a = Tensor::param(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
        let b = t64(vec![2.0, 3.0, 4.0, 5.0], &[2, 2]);
        a.matmul(&b).unwrap().reduce_sum().backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![5.0, 9.0, 5.0, 9.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = t64(vec![0.0; 6], &[2, 3]);
        let b = t64(vec![0.0; 4], &[2, 2]);
        match a.matmul(&b) {
            Err(Error::ShapeMismatch { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 2]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn matmul_nt_agrees_with_explicit_transpose() {
        let a = t64(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1, 2, 3]);
        let b = t64(vec![0.5, -1.0, 2.0, 1.5, 0.0, 1.0], &[1, 2, 3]);
        let nt = a.matmul_nt(&b).unwrap();
        let via_t = a.matmul(&b.transpose(1, 2).unwrap()).unwrap();
        assert_eq!(nt.data(), via_t.data());
    }

    #[test]
    fn softmax_symmetry_and_stability() {
        let x = t64(vec![0.0, 0.0, 0.0], &[3]);
        let y = x.softmax(0).unwrap();
        for &v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let big = t64(vec![1000.0, 1000.0], &[2]);
        let y = big.softmax(0).unwrap();
        assert!((y.data()[0] - 0.5).abs() < 1e-12);
        assert!(y.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_direct_evaluation() {
        let x = t64(vec![1.0, 2.0, 3.0], &[3]);
        let y = x.softmax(0).unwrap();
        let expect = [0.09003, 0.24473, 0.66524];
        for (v, e) in y.data().iter().zip(expect) {
            assert!((v - e).abs() < 1e-5, "{v} vs {e}");
        }
    }

    #[test]
    fn softmax_rejects_non_finite() {
        let x = t64(vec![1.0, f64::NAN], &[2]);
        assert!(matches!(x.softmax(0), Err(Error::Numeric { .. })));
        let x = t64(vec![1.0, f64::INFINITY], &[2]);
        assert!(matches!(x.softmax(0), Err(Error::Numeric { .. })));
    }

    #[test]
    fn softmax_slices_sum_to_one() {
        let x = t64((0..24).map(|i| (i as f64) * 0.37 - 4.0).collect(), &[2, 3, 4]);
        for axis in 0..3 {
            let y = x.softmax(axis).unwrap();
            let inner: usize = y.shape()[axis + 1..].iter().product();
            let outer: usize = y.shape()[..axis].iter().product();
            let alen = y.shape()[axis];
            for o in 0..outer {
                for i in 0..inner {
                    let s: f64 = (0..alen)
                        .map(|k| y.data()[o * alen * inner + k * inner + i])
                        .sum();
                    assert!((s - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn layer_norm_constant_input_is_zeroed() {
        let x = t64(vec![5.0; 4], &[1, 4]);
        let gamma = t64(vec![1.0; 4], &[4]);
        let beta = t64(vec![0.0; 4], &[4]);
        let y = x.layer_norm(&gamma, &beta, 1e-5).unwrap();
        for &v in y.data() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn layer_norm_two_points() {
        let x = t64(vec![1.0, 3.0], &[1, 2]);
        let gamma = t64(vec![1.0; 2], &[2]);
        let beta = t64(vec![0.0; 2], &[2]);
        let y = x.layer_norm(&gamma, &beta, 1e-12).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-5);
        assert!((y.data()[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn layer_norm_affine_override() {
        let x = t64(vec![0.3, -2.0, 4.0], &[1, 3]);
        let gamma = t64(vec![0.0; 3], &[3]);
        let beta = t64(vec![5.0; 3], &[3]);
        let y = x.layer_norm(&gamma, &beta, 1e-5).unwrap();
        assert_eq!(y.data(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn conv1d_pointwise_identity() {
        // k=1 kernel, identity mapping m -> d=m
        let x = t64(vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0], &[1, 3, 2]);
        let kernel = t64(vec![1.0, 0.0, 0.0, 1.0], &[1, 2, 2]);
        let bias = t64(vec![0.0, 0.0], &[2]);
        let y = x.conv1d(&kernel, &bias, 1, 0).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv1d_sliding_sum_with_padding() {
        let x = t64(vec![1.0, 2.0, 3.0], &[1, 3, 1]);
        let kernel = t64(vec![1.0, 1.0, 1.0], &[3, 1, 1]);
        let bias = t64(vec![0.0], &[1]);
        let y = x.conv1d(&kernel, &bias, 1, 1).unwrap();
        assert_eq!(y.data(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn conv1d_rejects_non_integer_output_length() {
        let x = t64(vec![0.0; 5], &[1, 5, 1]);
        let kernel = t64(vec![0.0; 2], &[2, 1, 1]);
        let bias = t64(vec![0.0], &[1]);
        assert!(x.conv1d(&kernel, &bias, 2, 0).is_err());
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = t64(vec![1.0, 2.0, 3.0], &[3]);
        let y = x.dropout(0.0, true, &mut rng).unwrap();
        assert_eq!(y.data(), x.data());
        let y = x.dropout(0.9, false, &mut rng).unwrap();
        assert_eq!(y.data(), x.data());
        assert!(matches!(
            x.dropout(1.0, true, &mut rng),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn dropout_preserves_mean_at_large_n() {
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::<f64>::constant(vec![1.0; n], &[n]).unwrap();
        let y = x.dropout(0.5, true, &mut rng).unwrap();
        let mean: f64 = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn gather_then_scatter_roundtrip() {
        let x = t64((0..12).map(|v| v as f64).collect(), &[4, 3]);
        let idx = [1, 3];
        let picked = x.gather_rows(0, &idx).unwrap();
        let back = picked.scatter_rows(0, &idx, 4).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let want = if idx.contains(&i) { x.data()[i * 3 + j] } else { 0.0 };
                assert_eq!(back.data()[i * 3 + j], want);
            }
        }
    }

    #[test]
    fn gather_rows_gradient_routes_only_to_selected_rows() {
        let x = Tensor::param((0..6).map(|v| v as f64).collect(), &[3, 2]).unwrap();
        let y = x.gather_rows(0, &[2]).unwrap();
        y.reduce_sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn gather_rows_rejects_out_of_range() {
        let x = t64(vec![0.0; 6], &[3, 2]);
        assert!(matches!(
            x.gather_rows(0, &[3]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn scatter_rows_rejects_duplicates() {
        let x = t64(vec![0.0; 4], &[2, 2]);
        assert!(matches!(
            x.scatter_rows(0, &[1, 1], 4),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn reduce_mean_example() {
        let x = t64(vec![2.0, 4.0], &[2]);
        assert_eq!(x.reduce_mean().item(), 3.0);
    }

    #[test]
    fn transpose_swaps_axes() {
        let x = t64((0..6).map(|v| v as f64).collect(), &[2, 3]);
        let y = x.transpose(0, 1).unwrap();
        assert_eq!(y.shape(), &[3, 2]);
        assert_eq!(y.data(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
        let back = y.transpose(0, 1).unwrap();
        assert_eq!(back.data(), x.data());
    }

    #[test]
    fn transpose_4d_roundtrip() {
        let x = t64((0..24).map(|v| v as f64 * 1.5).collect(), &[2, 3, 2, 2]);
        let y = x.transpose(1, 2).unwrap();
        assert_eq!(y.shape(), &[2, 2, 3, 2]);
        let back = y.transpose(1, 2).unwrap();
        assert_eq!(back.data(), x.data());
    }

    #[test]
    fn concat_and_gradient_split() {
        let a = Tensor::param(vec![1.0, 2.0], &[1, 2]).unwrap();
        let b = Tensor::param(vec![3.0, 4.0, 5.0, 6.0], &[2, 2]).unwrap();
        let y = Tensor::concat(&[a.clone(), b.clone()], 0).unwrap();
        assert_eq!(y.shape(), &[3, 2]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        y.scale(2.0).reduce_sum().backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![2.0, 2.0]);
        assert_eq!(b.grad().unwrap(), vec![2.0; 4]);
    }

    #[test]
    fn broadcast_add_bias_sums_gradient() {
        let x = Tensor::param(vec![1.0; 6], &[2, 3]).unwrap();
        let b = Tensor::param(vec![0.5, 0.5, 0.5], &[3]).unwrap();
        let y = x.add(&b).unwrap();
        assert!(y.data().iter().all(|&v| v == 1.5));
        y.reduce_sum().backward().unwrap();
        assert_eq!(b.grad().unwrap(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn broadcast_suffix_tiles_and_sums_back() {
        let v = Tensor::param(vec![1.0, -1.0], &[2]).unwrap();
        let y = v.broadcast_suffix(&[3]);
        assert_eq!(y.shape(), &[3, 2]);
        y.reduce_sum().backward().unwrap();
        assert_eq!(v.grad().unwrap(), vec![3.0, 3.0]);
    }
}
