//! Forward primitives and their backward rules.

use super::{Mode, Tensor, TensorError};
use crate::rng::SeedRng;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize), TensorError> {
    match *t.shape() {
        [r, c] => Ok((r, c)),
        _ => Err(TensorError::InvalidParameter {
            op,
            msg: format!("expected a 2-d tensor, got shape {:?}", t.shape()),
        }),
    }
}

/// `c[m,n] = a[m,k] · b[k,n]`, row-major.
pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

impl Tensor {
    // ── elementwise ──────────────────────────────────────────────────

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        same_shape("add", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|g, parents| {
                parents[0].accum_grad(g);
                parents[1].accum_grad(g);
            }),
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        same_shape("sub", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|g, parents| {
                parents[0].accum_grad(g);
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                parents[1].accum_grad(&neg);
            }),
        ))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        same_shape("mul", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| a * b)
            .collect();
        let (a, b) = (self.data().to_vec(), other.data().to_vec());
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |g, parents| {
                let da: Vec<f64> = g.iter().zip(&b).map(|(gi, bi)| gi * bi).collect();
                let db: Vec<f64> = g.iter().zip(&a).map(|(gi, ai)| gi * ai).collect();
                parents[0].accum_grad(&da);
                parents[1].accum_grad(&db);
            }),
        ))
    }

    pub fn scale(&self, c: f64) -> Tensor {
        let data = self.data().iter().map(|v| v * c).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let dx: Vec<f64> = g.iter().map(|v| v * c).collect();
                parents[0].accum_grad(&dx);
            }),
        )
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let data = self.data().iter().map(|v| v + c).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(|g, parents| parents[0].accum_grad(g)),
        )
    }

    // ── linear algebra ───────────────────────────────────────────────

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (m, k) = dims2("matmul", self)?;
        let (k2, n) = dims2("matmul", other)?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: self.shape().to_vec(),
                right: other.shape().to_vec(),
            });
        }
        let data = matmul_raw(self.data(), other.data(), m, k, n);
        let (a, b) = (self.data().to_vec(), other.data().to_vec());
        Ok(Tensor::from_op(
            vec![m, n],
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |g, parents| {
                // dA = dC · Bᵀ
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    for p in 0..k {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += g[i * n + j] * b[p * n + j];
                        }
                        da[i * k + p] = s;
                    }
                }
                parents[0].accum_grad(&da);
                // dB = Aᵀ · dC
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let av = a[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            db[p * n + j] += av * g[i * n + j];
                        }
                    }
                }
                parents[1].accum_grad(&db);
            }),
        ))
    }

    pub fn transpose2(&self) -> Result<Tensor, TensorError> {
        let (r, c) = dims2("transpose", self)?;
        let src = self.data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        Ok(Tensor::from_op(
            vec![c, r],
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        dx[i * c + j] = g[j * r + i];
                    }
                }
                parents[0].accum_grad(&dx);
            }),
        ))
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor, TensorError> {
        if shape.iter().product::<usize>() != self.len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: self.shape().to_vec(),
                right: shape,
            });
        }
        Ok(Tensor::from_op(
            shape,
            self.data().to_vec(),
            vec![self.clone()],
            Box::new(|g, parents| parents[0].accum_grad(g)),
        ))
    }

    /// Stack 2-d blocks vertically (shared column count).
    pub fn concat_rows(parts: &[Tensor]) -> Result<Tensor, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidParameter {
                op: "concat_rows",
                msg: "no tensors to concatenate".into(),
            });
        }
        let (_, cols) = dims2("concat_rows", &parts[0])?;
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            let (r, c) = dims2("concat_rows", p)?;
            if c != cols {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    left: parts[0].shape().to_vec(),
                    right: p.shape().to_vec(),
                });
            }
            rows += r;
            data.extend_from_slice(p.data());
        }
        let sizes: Vec<usize> = parts.iter().map(|p| p.len()).collect();
        Ok(Tensor::from_op(
            vec![rows, cols],
            data,
            parts.to_vec(),
            Box::new(move |g, parents| {
                let mut off = 0;
                for (p, &sz) in parents.iter().zip(&sizes) {
                    p.accum_grad(&g[off..off + sz]);
                    off += sz;
                }
            }),
        ))
    }

    /// Stack 2-d blocks horizontally (shared row count).
    pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::InvalidParameter {
                op: "concat_cols",
                msg: "no tensors to concatenate".into(),
            });
        }
        let (rows, _) = dims2("concat_cols", &parts[0])?;
        let widths: Vec<usize> = parts
            .iter()
            .map(|p| {
                let (r, c) = dims2("concat_cols", p)?;
                if r != rows {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat_cols",
                        left: parts[0].shape().to_vec(),
                        right: p.shape().to_vec(),
                    });
                }
                Ok(c)
            })
            .collect::<Result<_, _>>()?;
        let cols: usize = widths.iter().sum();
        let mut data = vec![0.0; rows * cols];
        let mut off = 0;
        for (p, &w) in parts.iter().zip(&widths) {
            let src = p.data();
            for i in 0..rows {
                data[i * cols + off..i * cols + off + w].copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            off += w;
        }
        let widths_bw = widths.clone();
        Ok(Tensor::from_op(
            vec![rows, cols],
            data,
            parts.to_vec(),
            Box::new(move |g, parents| {
                let mut off = 0;
                for (p, &w) in parents.iter().zip(&widths_bw) {
                    let mut dp = vec![0.0; rows * w];
                    for i in 0..rows {
                        dp[i * w..(i + 1) * w]
                            .copy_from_slice(&g[i * cols + off..i * cols + off + w]);
                    }
                    p.accum_grad(&dp);
                    off += w;
                }
            }),
        ))
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Tensor, TensorError> {
        let (r, c) = dims2("slice_rows", self)?;
        if start > end || end > r {
            return Err(TensorError::InvalidParameter {
                op: "slice_rows",
                msg: format!("range {start}..{end} out of bounds for {r} rows"),
            });
        }
        let data = self.data()[start * c..end * c].to_vec();
        Ok(Tensor::from_op(
            vec![end - start, c],
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let mut dx = vec![0.0; r * c];
                dx[start * c..end * c].copy_from_slice(g);
                parents[0].accum_grad(&dx);
            }),
        ))
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Tensor, TensorError> {
        let (r, c) = dims2("slice_cols", self)?;
        if start > end || end > c {
            return Err(TensorError::InvalidParameter {
                op: "slice_cols",
                msg: format!("range {start}..{end} out of bounds for {c} columns"),
            });
        }
        let w = end - start;
        let src = self.data();
        let mut data = vec![0.0; r * w];
        for i in 0..r {
            data[i * w..(i + 1) * w].copy_from_slice(&src[i * c + start..i * c + end]);
        }
        Ok(Tensor::from_op(
            vec![r, w],
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    dx[i * c + start..i * c + end].copy_from_slice(&g[i * w..(i + 1) * w]);
                }
                parents[0].accum_grad(&dx);
            }),
        ))
    }

    /// Row `r` of a 2-d tensor as a 1-d vector.
    pub fn row(&self, r: usize) -> Result<Tensor, TensorError> {
        let (_, c) = dims2("row", self)?;
        self.slice_rows(r, r + 1)?.reshape(vec![c])
    }

    /// `[n, d] + [d]`, the bias broadcast over rows.
    pub fn add_row_broadcast(&self, bias: &Tensor) -> Result<Tensor, TensorError> {
        let (r, c) = dims2("add_row_broadcast", self)?;
        if bias.shape() != [c] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row_broadcast",
                left: self.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        let b = bias.data();
        let data = self
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + b[i % c])
            .collect();
        Ok(Tensor::from_op(
            vec![r, c],
            data,
            vec![self.clone(), bias.clone()],
            Box::new(move |g, parents| {
                parents[0].accum_grad(g);
                let mut db = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        db[j] += g[i * c + j];
                    }
                }
                parents[1].accum_grad(&db);
            }),
        ))
    }

    // ── reductions ───────────────────────────────────────────────────

    pub fn sum(&self) -> Tensor {
        let s = self.data().iter().sum();
        let n = self.len();
        Tensor::from_op(
            vec![1],
            vec![s],
            vec![self.clone()],
            Box::new(move |g, parents| {
                parents[0].accum_grad(&vec![g[0]; n]);
            }),
        )
    }

    pub fn mean(&self) -> Tensor {
        let n = self.len();
        self.sum().scale(1.0 / n as f64)
    }

    /// Per-column mean of a 2-d tensor: `[n, d] -> [d]`.
    pub fn mean_rows(&self) -> Result<Tensor, TensorError> {
        let (r, c) = dims2("mean_rows", self)?;
        let src = self.data();
        let mut data = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                data[j] += src[i * c + j];
            }
        }
        for v in &mut data {
            *v /= r as f64;
        }
        Ok(Tensor::from_op(
            vec![c],
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        dx[i * c + j] = g[j] / r as f64;
                    }
                }
                parents[0].accum_grad(&dx);
            }),
        ))
    }

    // ── nonlinearities ───────────────────────────────────────────────

    /// Numerically stable softmax over the last axis (max-subtraction).
    pub fn softmax_last(&self) -> Tensor {
        let n = *self.shape().last().expect("softmax on empty shape");
        let rows = self.len() / n;
        let src = self.data();
        let mut data = vec![0.0; self.len()];
        for i in 0..rows {
            let row = &src[i * n..(i + 1) * n];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..n {
                let e = (row[j] - mx).exp();
                data[i * n + j] = e;
                z += e;
            }
            for j in 0..n {
                data[i * n + j] /= z;
            }
        }
        let y = data.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                // dx_j = y_j (g_j − Σ_k g_k y_k), per row
                let mut dx = vec![0.0; y.len()];
                for i in 0..rows {
                    let mut dot = 0.0;
                    for j in 0..n {
                        dot += g[i * n + j] * y[i * n + j];
                    }
                    for j in 0..n {
                        dx[i * n + j] = y[i * n + j] * (g[i * n + j] - dot);
                    }
                }
                parents[0].accum_grad(&dx);
            }),
        )
    }

    /// Softmax over an arbitrary axis of a 1-d or 2-d tensor.
    pub fn softmax(&self, axis: usize) -> Result<Tensor, TensorError> {
        match (self.shape().len(), axis) {
            (1, 0) => Ok(self.softmax_last()),
            (2, 1) => Ok(self.softmax_last()),
            (2, 0) => Ok(self.transpose2()?.softmax_last().transpose2()?),
            _ => Err(TensorError::InvalidParameter {
                op: "softmax",
                msg: format!("axis {axis} invalid for shape {:?}", self.shape()),
            }),
        }
    }

    pub fn tanh_act(&self) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|v| v.tanh()).collect();
        let y = data.clone();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let dx: Vec<f64> = g.iter().zip(&y).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect();
                parents[0].accum_grad(&dx);
            }),
        )
    }

    /// GELU, tanh approximation.
    pub fn gelu(&self) -> Tensor {
        const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
        const A: f64 = 0.044715;
        let x = self.data().to_vec();
        let data: Vec<f64> = x
            .iter()
            .map(|&v| 0.5 * v * (1.0 + (C * (v + A * v * v * v)).tanh()))
            .collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let dx: Vec<f64> = g
                    .iter()
                    .zip(&x)
                    .map(|(gi, &v)| {
                        let u = C * (v + A * v * v * v);
                        let t = u.tanh();
                        let du = C * (1.0 + 3.0 * A * v * v);
                        gi * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du)
                    })
                    .collect();
                parents[0].accum_grad(&dx);
            }),
        )
    }

    /// Layer normalization over the last axis, then affine `gain ⊙ x̂ + bias`.
    pub fn layer_norm(&self, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor, TensorError> {
        let d = *self.shape().last().ok_or(TensorError::InvalidParameter {
            op: "layer_norm",
            msg: "empty shape".into(),
        })?;
        if gain.shape() != [d] || bias.shape() != [d] {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm",
                left: self.shape().to_vec(),
                right: gain.shape().to_vec(),
            });
        }
        if eps <= 0.0 {
            return Err(TensorError::InvalidParameter {
                op: "layer_norm",
                msg: format!("eps must be positive, got {eps}"),
            });
        }
        let rows = self.len() / d;
        let src = self.data();
        let gd = gain.data();
        let bd = bias.data();
        let mut data = vec![0.0; self.len()];
        let mut xhat = vec![0.0; self.len()];
        let mut inv_sigma = vec![0.0; rows];
        for i in 0..rows {
            let row = &src[i * d..(i + 1) * d];
            let mu = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_sigma[i] = is;
            for j in 0..d {
                let xh = (row[j] - mu) * is;
                xhat[i * d + j] = xh;
                data[i * d + j] = gd[j] * xh + bd[j];
            }
        }
        let gd = gd.to_vec();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), gain.clone(), bias.clone()],
            Box::new(move |g, parents| {
                let mut dgain = vec![0.0; d];
                let mut dbias = vec![0.0; d];
                let mut dx = vec![0.0; rows * d];
                for i in 0..rows {
                    let gr = &g[i * d..(i + 1) * d];
                    let xh = &xhat[i * d..(i + 1) * d];
                    let mut m1 = 0.0; // mean of dxhat
                    let mut m2 = 0.0; // mean of dxhat ⊙ xhat
                    for j in 0..d {
                        dgain[j] += gr[j] * xh[j];
                        dbias[j] += gr[j];
                        let dxh = gr[j] * gd[j];
                        m1 += dxh;
                        m2 += dxh * xh[j];
                    }
                    m1 /= d as f64;
                    m2 /= d as f64;
                    for j in 0..d {
                        let dxh = gr[j] * gd[j];
                        dx[i * d + j] = inv_sigma[i] * (dxh - m1 - xh[j] * m2);
                    }
                }
                parents[0].accum_grad(&dx);
                parents[1].accum_grad(&dgain);
                parents[2].accum_grad(&dbias);
            }),
        ))
    }

    // ── stochastic / lookup ──────────────────────────────────────────

    /// Inverted dropout: survivors scaled by 1/(1−p). Eval mode is the
    /// identity, bit-exact.
    pub fn dropout(&self, p: f64, mode: Mode, rng: &mut SeedRng) -> Result<Tensor, TensorError> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidParameter {
                op: "dropout",
                msg: format!("discard probability must be in [0, 1), got {p}"),
            });
        }
        if mode == Mode::Eval || p == 0.0 {
            // Identity pass-through, still recorded for gradient flow.
            return Ok(Tensor::from_op(
                self.shape().to_vec(),
                self.data().to_vec(),
                vec![self.clone()],
                Box::new(|g, parents| parents[0].accum_grad(g)),
            ));
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.len())
            .map(|_| if rng.uniform() < p { 0.0 } else { keep })
            .collect();
        let data = self
            .data()
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let dx: Vec<f64> = g.iter().zip(&mask).map(|(gi, m)| gi * m).collect();
                parents[0].accum_grad(&dx);
            }),
        ))
    }

    /// Gather rows of an embedding table: `table[vocab, d][ids] -> [n, d]`.
    pub fn embedding_lookup(table: &Tensor, ids: &[usize]) -> Result<Tensor, TensorError> {
        let (vocab, d) = dims2("embedding_lookup", table)?;
        for (pos, &id) in ids.iter().enumerate() {
            if id >= vocab {
                return Err(TensorError::InvalidParameter {
                    op: "embedding_lookup",
                    msg: format!("id {id} at position {pos} out of vocabulary (size {vocab})"),
                });
            }
        }
        let src = table.data();
        let mut data = vec![0.0; ids.len() * d];
        for (i, &id) in ids.iter().enumerate() {
            data[i * d..(i + 1) * d].copy_from_slice(&src[id * d..(id + 1) * d]);
        }
        let ids = ids.to_vec();
        Ok(Tensor::from_op(
            vec![ids.len(), d],
            data,
            vec![table.clone()],
            Box::new(move |g, parents| {
                let mut dt = vec![0.0; vocab * d];
                for (i, &id) in ids.iter().enumerate() {
                    for j in 0..d {
                        dt[id * d + j] += g[i * d + j];
                    }
                }
                parents[0].accum_grad(&dt);
            }),
        ))
    }

    /// Mean over the batch of `−log softmax(logits)[target]`.
    pub fn cross_entropy(&self, targets: &[usize]) -> Result<Tensor, TensorError> {
        let (b, n) = dims2("cross_entropy", self)?;
        if targets.len() != b {
            return Err(TensorError::InvalidParameter {
                op: "cross_entropy",
                msg: format!("{} targets for {b} logit rows", targets.len()),
            });
        }
        for (row, &t) in targets.iter().enumerate() {
            if t >= n {
                return Err(TensorError::TargetOutOfRange {
                    row,
                    index: t,
                    n_classes: n,
                });
            }
        }
        let src = self.data();
        let mut probs = vec![0.0; b * n];
        let mut loss = 0.0;
        for i in 0..b {
            let row = &src[i * n..(i + 1) * n];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..n {
                let e = (row[j] - mx).exp();
                probs[i * n + j] = e;
                z += e;
            }
            for j in 0..n {
                probs[i * n + j] /= z;
            }
            loss -= row[targets[i]] - mx - z.ln();
        }
        loss /= b as f64;
        let targets = targets.to_vec();
        Ok(Tensor::from_op(
            vec![1],
            vec![loss],
            vec![self.clone()],
            Box::new(move |g, parents| {
                let scale = g[0] / b as f64;
                let mut dx = vec![0.0; b * n];
                for i in 0..b {
                    for j in 0..n {
                        let ind = if j == targets[i] { 1.0 } else { 0.0 };
                        dx[i * n + j] = scale * (probs[i * n + j] - ind);
                    }
                }
                parents[0].accum_grad(&dx);
            }),
        ))
    }

    /// Relative-offset gather for attention position terms.
    ///
    /// Input is `[q_len, n_rel]` with column `r` holding the term for
    /// relative distance `d = r − (q_len − 1)`; output is `[q_len, k_len]`
    /// with `out[i][j] = in[i][(q_len − 1) + (i + m_len − j)]`, where queries
    /// sit `m_len` positions past the start of the key range.
    pub fn gather_rel(&self, m_len: usize) -> Result<Tensor, TensorError> {
        let (q_len, n_rel) = dims2("gather_rel", self)?;
        if n_rel < q_len {
            return Err(TensorError::InvalidParameter {
                op: "gather_rel",
                msg: format!("n_rel {n_rel} smaller than q_len {q_len}"),
            });
        }
        let k_len = n_rel + 1 - q_len;
        if k_len != q_len + m_len {
            return Err(TensorError::InvalidParameter {
                op: "gather_rel",
                msg: format!("k_len {k_len} inconsistent with q_len {q_len} + m_len {m_len}"),
            });
        }
        let src = self.data();
        let mut data = vec![0.0; q_len * k_len];
        for i in 0..q_len {
            for j in 0..k_len {
                let r = (q_len - 1 + i + m_len) - j;
                data[i * k_len + j] = src[i * n_rel + r];
            }
        }
        Ok(Tensor::from_op(
            vec![q_len, k_len],
            data,
            vec![self.clone()],
            Box::new(move |g, parents| {
                let mut dx = vec![0.0; q_len * n_rel];
                for i in 0..q_len {
                    for j in 0..k_len {
                        let r = (q_len - 1 + i + m_len) - j;
                        dx[i * n_rel + r] += g[i * k_len + j];
                    }
                }
                parents[0].accum_grad(&dx);
            }),
        ))
    }
}
