//! Convolution, max-pooling and dense layers on batched `[batch, channels, height, width]`
//! buffers, with optional fused ReLU.

use super::scalar::{gemm, Mat, Scalar};

/// Samples per gradient shard; partial gradients are reduced in shard order, so results do
/// not depend on the number of worker threads.
const SHARD: usize = 8;

#[cfg(feature = "parallel")]
fn map_shards<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_shards<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

fn shards(batch: usize) -> usize {
    batch.div_ceil(SHARD)
}

fn shard_range(s: usize, batch: usize) -> std::ops::Range<usize> {
    s * SHARD..((s + 1) * SHARD).min(batch)
}

fn relu_in_place<S: Scalar>(x: &mut [S]) {
    for v in x {
        if *v < S::ZERO {
            *v = S::ZERO;
        }
    }
}

/// Gradients of one layer for a batch.
#[derive(Debug, Clone)]
pub struct LayerGrads<S> {
    pub weight: Vec<S>,
    pub bias: Vec<S>,
    pub input: Option<Vec<S>>,
}

/// Zero-padded ("same") convolution with an odd square kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub height: usize,
    pub width: usize,
}

impl Conv2d {
    pub fn pad(&self) -> usize {
        (self.kernel - 1) / 2
    }

    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad() - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad() - self.kernel) / self.stride + 1
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.fan_in()
    }

    fn in_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    fn out_len(&self) -> usize {
        self.out_channels * self.out_height() * self.out_width()
    }

    /// Output columns `ox` whose input column `ox * stride + kx - pad` lies inside the image.
    fn valid_cols(&self, kx: usize) -> std::ops::Range<usize> {
        let (s, p, wo) = (self.stride, self.pad(), self.out_width());
        let lo = p.saturating_sub(kx).div_ceil(s);
        let hi = if self.width + p > kx { ((self.width + p - kx - 1) / s + 1).min(wo) } else { 0 };
        lo..hi.max(lo)
    }

    fn im2col<S: Scalar>(&self, x: &[S], col: &mut [S]) {
        let (k, s, p) = (self.kernel, self.stride, self.pad());
        let (ho, wo) = (self.out_height(), self.out_width());
        let mut rows = col.chunks_mut(ho * wo);
        for c in 0..self.in_channels {
            let plane = &x[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = rows.next().expect("im2col row");
                    let cols = self.valid_cols(kx);
                    for oy in 0..ho {
                        let out = &mut row[oy * wo..(oy + 1) * wo];
                        let iy = oy * s + ky;
                        if iy < p || iy - p >= self.height {
                            out.fill(S::ZERO);
                            continue;
                        }
                        let src = &plane[(iy - p) * self.width..(iy - p + 1) * self.width];
                        out[..cols.start].fill(S::ZERO);
                        out[cols.end..].fill(S::ZERO);
                        if s == 1 {
                            let x0 = cols.start + kx - p;
                            out[cols.clone()].copy_from_slice(&src[x0..x0 + cols.len()]);
                        } else {
                            for ox in cols.clone() {
                                out[ox] = src[ox * s + kx - p];
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im<S: Scalar>(&self, col: &[S], dx: &mut [S]) {
        let (k, s, p) = (self.kernel, self.stride, self.pad());
        let (ho, wo) = (self.out_height(), self.out_width());
        let mut rows = col.chunks(ho * wo);
        for c in 0..self.in_channels {
            let plane = &mut dx[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = rows.next().expect("col2im row");
                    let cols = self.valid_cols(kx);
                    for oy in 0..ho {
                        let iy = oy * s + ky;
                        if iy < p || iy - p >= self.height {
                            continue;
                        }
                        let dst = &mut plane[(iy - p) * self.width..(iy - p + 1) * self.width];
                        let src = &row[oy * wo..(oy + 1) * wo];
                        for ox in cols.clone() {
                            dst[ox * s + kx - p] += src[ox];
                        }
                    }
                }
            }
        }
    }

    pub fn forward<S: Scalar>(&self, weight: &[S], bias: &[S], input: &[S], batch: usize, relu: bool) -> Vec<S> {
        let (kk, hw) = (self.fan_in(), self.out_height() * self.out_width());
        let parts = map_shards(shards(batch), |s| {
            let range = shard_range(s, batch);
            let mut col = vec![S::ZERO; kk * hw];
            let mut out = vec![S::ZERO; range.len() * self.out_len()];
            for (j, b) in range.enumerate() {
                self.im2col(&input[b * self.in_len()..(b + 1) * self.in_len()], &mut col);
                let o = &mut out[j * self.out_len()..(j + 1) * self.out_len()];
                for (co, row) in o.chunks_mut(hw).enumerate() {
                    row.fill(bias[co]);
                }
                gemm(self.out_channels, kk, hw, Mat::rows(weight, kk), Mat::rows(&col, hw), S::ONE, o);
            }
            out
        });
        let mut out = parts.concat();
        if relu {
            relu_in_place(&mut out);
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward<S: Scalar>(
        &self,
        weight: &[S],
        input: &[S],
        output: &[S],
        grad_output: &[S],
        batch: usize,
        relu: bool,
        input_grad: bool,
    ) -> LayerGrads<S> {
        let (kk, hw, co) = (self.fan_in(), self.out_height() * self.out_width(), self.out_channels);
        let parts = map_shards(shards(batch), |s| {
            let range = shard_range(s, batch);
            let mut col = vec![S::ZERO; kk * hw];
            let mut dw = vec![S::ZERO; self.weight_len()];
            let mut db = vec![S::ZERO; co];
            let mut din = if input_grad {
                vec![S::ZERO; range.len() * self.in_len()]
            } else {
                Vec::new()
            };
            let mut dz = vec![S::ZERO; self.out_len()];
            for (j, b) in range.enumerate() {
                let span = b * self.out_len()..(b + 1) * self.out_len();
                for ((d, &g), &y) in dz.iter_mut().zip(&grad_output[span.clone()]).zip(&output[span]) {
                    *d = if relu && !(y > S::ZERO) { S::ZERO } else { g };
                }
                for (c, row) in dz.chunks(hw).enumerate() {
                    for &v in row {
                        db[c] += v;
                    }
                }
                self.im2col(&input[b * self.in_len()..(b + 1) * self.in_len()], &mut col);
                gemm(co, hw, kk, Mat::rows(&dz, hw), Mat::transposed(&col, hw), S::ONE, &mut dw);
                if input_grad {
                    gemm(kk, co, hw, Mat::transposed(weight, kk), Mat::rows(&dz, hw), S::ZERO, &mut col);
                    self.col2im(&col, &mut din[j * self.in_len()..(j + 1) * self.in_len()]);
                }
            }
            (dw, db, din)
        });
        reduce(parts, input_grad)
    }
}

fn reduce<S: Scalar>(parts: Vec<(Vec<S>, Vec<S>, Vec<S>)>, input_grad: bool) -> LayerGrads<S> {
    let mut iter = parts.into_iter();
    let (mut weight, mut bias, mut input) = iter.next().expect("nonempty batch");
    for (w, b, d) in iter {
        for (x, y) in weight.iter_mut().zip(w) {
            *x += y;
        }
        for (x, y) in bias.iter_mut().zip(b) {
            *x += y;
        }
        input.extend(d);
    }
    LayerGrads {
        weight,
        bias,
        input: input_grad.then_some(input),
    }
}

/// Non-overlapping max pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool2d {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub window: usize,
}

impl MaxPool2d {
    pub fn out_height(&self) -> usize {
        self.height / self.window
    }

    pub fn out_width(&self) -> usize {
        self.width / self.window
    }

    /// Pooled values and, per output, the flat input index of the (first) maximum.
    pub fn forward<S: Scalar>(&self, input: &[S], batch: usize) -> (Vec<S>, Vec<u32>) {
        let (ho, wo, w) = (self.out_height(), self.out_width(), self.window);
        let n = batch * self.channels * ho * wo;
        let mut out = Vec::with_capacity(n);
        let mut arg = Vec::with_capacity(n);
        for bc in 0..batch * self.channels {
            let base = bc * self.height * self.width;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = base + oy * w * self.width + ox * w;
                    for dy in 0..w {
                        for dx in 0..w {
                            let i = base + (oy * w + dy) * self.width + ox * w + dx;
                            if input[i] > input[best] {
                                best = i;
                            }
                        }
                    }
                    out.push(input[best]);
                    arg.push(best as u32);
                }
            }
        }
        (out, arg)
    }

    pub fn backward<S: Scalar>(&self, grad_output: &[S], argmax: &[u32], batch: usize) -> Vec<S> {
        let mut din = vec![S::ZERO; batch * self.channels * self.height * self.width];
        for (&g, &i) in grad_output.iter().zip(argmax) {
            din[i as usize] += g;
        }
        din
    }
}

/// Fully connected layer; weights are `[outputs, inputs]` row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn weight_len(&self) -> usize {
        self.inputs * self.outputs
    }

    pub fn forward<S: Scalar>(&self, weight: &[S], bias: &[S], input: &[S], batch: usize, relu: bool) -> Vec<S> {
        let mut out = Vec::with_capacity(batch * self.outputs);
        for _ in 0..batch {
            out.extend_from_slice(bias);
        }
        gemm(
            batch,
            self.inputs,
            self.outputs,
            Mat::rows(input, self.inputs),
            Mat::transposed(weight, self.inputs),
            S::ONE,
            &mut out,
        );
        if relu {
            relu_in_place(&mut out);
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward<S: Scalar>(
        &self,
        weight: &[S],
        input: &[S],
        output: &[S],
        grad_output: &[S],
        batch: usize,
        relu: bool,
        input_grad: bool,
    ) -> LayerGrads<S> {
        let dz: Vec<S> = grad_output
            .iter()
            .zip(output)
            .map(|(&g, &y)| if relu && !(y > S::ZERO) { S::ZERO } else { g })
            .collect();
        let mut bias = vec![S::ZERO; self.outputs];
        for row in dz.chunks(self.outputs) {
            for (b, &v) in bias.iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut dw = vec![S::ZERO; self.weight_len()];
        gemm(
            self.outputs,
            batch,
            self.inputs,
            Mat::transposed(&dz, self.outputs),
            Mat::rows(input, self.inputs),
            S::ZERO,
            &mut dw,
        );
        let input = input_grad.then(|| {
            let mut din = vec![S::ZERO; batch * self.inputs];
            gemm(
                batch,
                self.outputs,
                self.inputs,
                Mat::rows(&dz, self.outputs),
                Mat::rows(weight, self.inputs),
                S::ZERO,
                &mut din,
            );
            din
        });
        LayerGrads { weight: dw, bias, input }
    }
}
