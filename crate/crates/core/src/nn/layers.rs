//! Layer kinds: 2-D convolution, max pooling, affine, time-delay affine and
//! the p-norm group nonlinearity, each with forward and backward passes.
//!
//! Conventions:
//! - convolutions are valid (no padding), stride 1;
//! - sequence data is a [`Mat`] with one frame per row;
//! - image-like data is a [`Ten3`] `[channel][time][freq]`;
//! - backward passes take the cached forward input (and output where the
//!   activation needs it) and return the input gradient.

use super::matmul::{axpy, matmul_nt};
use super::tensor::{Mat, Ten3};
use super::{NnError, Real};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

/// Valid 2-D convolution with optional fused ReLU.
///
/// Weights are laid out `[out_c][in_c][kh][kw]`, one bias per output map.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<R> {
    pub in_c: usize,
    pub out_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub weight: Vec<R>,
    pub bias: Vec<R>,
    pub relu: bool,
}

impl<R: Real> Conv2d<R> {
    pub fn zeros(in_c: usize, out_c: usize, kh: usize, kw: usize, relu: bool) -> Self {
        Conv2d {
            in_c,
            out_c,
            kh,
            kw,
            weight: vec![R::zero(); out_c * in_c * kh * kw],
            bias: vec![R::zero(); out_c],
            relu,
        }
    }

    #[inline]
    fn widx(&self, o: usize, c: usize, u: usize, v: usize) -> usize {
        ((o * self.in_c + c) * self.kh + u) * self.kw + v
    }

    pub fn out_shape(&self, x: &Ten3<R>) -> Result<(usize, usize, usize), NnError> {
        if x.c != self.in_c {
            return Err(NnError::Shape(format!(
                "conv expects {} input channels, got {}",
                self.in_c, x.c
            )));
        }
        if self.kh > x.h || self.kw > x.w {
            return Err(NnError::Shape(format!(
                "conv kernel {}x{} larger than input {}x{}",
                self.kh, self.kw, x.h, x.w
            )));
        }
        Ok((self.out_c, x.h - self.kh + 1, x.w - self.kw + 1))
    }

    /// `y[o,t,x] = b[o] + sum_{c,u,v} w[o,c,u,v] * in[c,t+u,x+v]`, then ReLU
    /// when enabled.
    pub fn forward(&self, x: &Ten3<R>) -> Result<Ten3<R>, NnError> {
        let (oc, oh, ow) = self.out_shape(x)?;
        let mut y = Ten3::zeros(oc, oh, ow);
        for o in 0..oc {
            let b = self.bias[o];
            for t in 0..oh {
                {
                    let yrow = y.row_mut(o, t);
                    for v in yrow.iter_mut() {
                        *v = b;
                    }
                }
                for c in 0..self.in_c {
                    for u in 0..self.kh {
                        let xrow = x.row(c, t + u);
                        for v in 0..self.kw {
                            let wv = self.weight[self.widx(o, c, u, v)];
                            let src = &xrow[v..v + ow];
                            axpy(y.row_mut(o, t), wv, src);
                        }
                    }
                }
            }
        }
        if self.relu {
            for v in y.data.iter_mut() {
                if *v < R::zero() {
                    *v = R::zero();
                }
            }
        }
        Ok(y)
    }

    /// Gradients given the cached input `x`, the forward output `y` (for the
    /// ReLU mask) and the output gradient. When `need_gx` is false the input
    /// gradient is skipped (first layer of a network).
    pub fn backward(
        &self,
        x: &Ten3<R>,
        y: &Ten3<R>,
        grad_y: &Ten3<R>,
        grad_w: &mut [R],
        grad_b: &mut [R],
        need_gx: bool,
    ) -> Ten3<R> {
        let mut g = grad_y.clone();
        if self.relu {
            for (gv, yv) in g.data.iter_mut().zip(y.data.iter()) {
                if *yv <= R::zero() {
                    *gv = R::zero();
                }
            }
        }
        let (oh, ow) = (g.h, g.w);
        let mut gx = if need_gx {
            Ten3::zeros(x.c, x.h, x.w)
        } else {
            Ten3::zeros(0, 0, 0)
        };
        for o in 0..self.out_c {
            let mut bsum = R::zero();
            for t in 0..oh {
                let grow = g.row(o, t);
                for &gv in grow {
                    bsum += gv;
                }
                for c in 0..self.in_c {
                    for u in 0..self.kh {
                        let xrow = x.row(c, t + u);
                        for v in 0..self.kw {
                            // dW[o,c,u,v] += sum_x g[o,t,x] * in[c,t+u,x+v]
                            let mut s = R::zero();
                            for (gv, xv) in grow.iter().zip(xrow[v..v + ow].iter()) {
                                s += *gv * *xv;
                            }
                            grad_w[self.widx(o, c, u, v)] += s;
                        }
                        if need_gx {
                            for v in 0..self.kw {
                                let wv = self.weight[self.widx(o, c, u, v)];
                                let dst = &mut gx.row_mut(c, t + u)[v..v + ow];
                                axpy(dst, wv, grow);
                            }
                        }
                    }
                }
            }
            grad_b[o] += bsum;
        }
        gx
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

// ---------------------------------------------------------------------------
// MaxPool2d
// ---------------------------------------------------------------------------

/// Max pooling over `[time][freq]` windows, applied per channel. Truncates
/// when the stride does not tile the input exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxPool2d {
    pub ph: usize,
    pub pw: usize,
    pub sh: usize,
    pub sw: usize,
}

impl MaxPool2d {
    /// Pooling over frequency only, the network's canonical use.
    pub fn freq_only(pw: usize) -> Self {
        MaxPool2d {
            ph: 1,
            pw,
            sh: 1,
            sw: pw,
        }
    }

    pub fn out_shape<R: Real>(&self, x: &Ten3<R>) -> Result<(usize, usize, usize), NnError> {
        if self.ph > x.h || self.pw > x.w {
            return Err(NnError::Shape(format!(
                "pool window {}x{} larger than input {}x{}",
                self.ph, self.pw, x.h, x.w
            )));
        }
        let oh = (x.h - self.ph) / self.sh + 1;
        let ow = (x.w - self.pw) / self.sw + 1;
        Ok((x.c, oh, ow))
    }

    /// Returns the pooled tensor and the flat argmax index of every output
    /// cell (ties resolve to the first maximum in scan order).
    pub fn forward<R: Real>(&self, x: &Ten3<R>) -> Result<(Ten3<R>, Vec<u32>), NnError> {
        let (oc, oh, ow) = self.out_shape(x)?;
        let mut y = Ten3::zeros(oc, oh, ow);
        let mut arg = vec![0u32; oc * oh * ow];
        for c in 0..oc {
            for ot in 0..oh {
                for ox in 0..ow {
                    let (t0, x0) = (ot * self.sh, ox * self.sw);
                    let mut best = x.get(c, t0, x0);
                    let mut best_idx = x.idx(c, t0, x0);
                    for u in 0..self.ph {
                        for v in 0..self.pw {
                            let val = x.get(c, t0 + u, x0 + v);
                            if val > best {
                                best = val;
                                best_idx = x.idx(c, t0 + u, x0 + v);
                            }
                        }
                    }
                    let oi = y.idx(c, ot, ox);
                    y.data[oi] = best;
                    arg[oi] = best_idx as u32;
                }
            }
        }
        Ok((y, arg))
    }

    /// Routes each output gradient to its stored argmax.
    pub fn backward<R: Real>(
        &self,
        in_shape: (usize, usize, usize),
        argmax: &[u32],
        grad_y: &Ten3<R>,
    ) -> Ten3<R> {
        let mut gx = Ten3::zeros(in_shape.0, in_shape.1, in_shape.2);
        for (gv, &ai) in grad_y.data.iter().zip(argmax.iter()) {
            gx.data[ai as usize] += *gv;
        }
        gx
    }
}

// ---------------------------------------------------------------------------
// Affine
// ---------------------------------------------------------------------------

/// Fully connected layer `y = W x + b` applied to every row of a sequence,
/// with optional fused ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<R> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[out_dim][in_dim]`, row-major.
    pub weight: Vec<R>,
    pub bias: Vec<R>,
    pub relu: bool,
}

impl<R: Real> Affine<R> {
    pub fn zeros(in_dim: usize, out_dim: usize, relu: bool) -> Self {
        Affine {
            in_dim,
            out_dim,
            weight: vec![R::zero(); out_dim * in_dim],
            bias: vec![R::zero(); out_dim],
            relu,
        }
    }

    fn weight_mat(&self) -> Mat<R> {
        Mat {
            rows: self.out_dim,
            cols: self.in_dim,
            data: self.weight.clone(),
        }
    }

    pub fn forward(&self, x: &Mat<R>) -> Result<Mat<R>, NnError> {
        if x.cols != self.in_dim {
            return Err(NnError::Shape(format!(
                "affine expects width {}, got {}",
                self.in_dim, x.cols
            )));
        }
        let w = self.weight_mat();
        let mut y = Mat::zeros(x.rows, self.out_dim);
        matmul_nt(x, &w, &mut y);
        for r in 0..y.rows {
            let row = y.row_mut(r);
            for (v, &b) in row.iter_mut().zip(self.bias.iter()) {
                *v += b;
                if self.relu && *v < R::zero() {
                    *v = R::zero();
                }
            }
        }
        Ok(y)
    }

    pub fn backward(
        &self,
        x: &Mat<R>,
        y: &Mat<R>,
        grad_y: &Mat<R>,
        grad_w: &mut [R],
        grad_b: &mut [R],
        need_gx: bool,
    ) -> Mat<R> {
        let mut g = grad_y.clone();
        if self.relu {
            for (gv, yv) in g.data.iter_mut().zip(y.data.iter()) {
                if *yv <= R::zero() {
                    *gv = R::zero();
                }
            }
        }
        // db = column sums of g
        for r in 0..g.rows {
            for (b, &gv) in grad_b.iter_mut().zip(g.row(r).iter()) {
                *b += gv;
            }
        }
        // dW = g^T * x, computed as row dot products over transposed copies.
        let gt = g.transposed();
        let xt = x.transposed();
        let mut dw = Mat::zeros(self.out_dim, self.in_dim);
        matmul_nt(&gt, &xt, &mut dw);
        for (acc, v) in grad_w.iter_mut().zip(dw.data.iter()) {
            *acc += *v;
        }
        if need_gx {
            // dX = g * W
            let wt = self.weight_mat().transposed();
            let mut gx = Mat::zeros(x.rows, self.in_dim);
            matmul_nt(&g, &wt, &mut gx);
            gx
        } else {
            Mat::zeros(0, 0)
        }
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

// ---------------------------------------------------------------------------
// TimeDelayAffine
// ---------------------------------------------------------------------------

/// Affine map over a sparse set of temporal offsets:
/// `y[t] = W concat(x[t+o] for o in offsets) + b`.
///
/// No padding: the output is shorter than the input by `max(offsets) -
/// min(offsets)` rows. An input too short for the offsets yields an empty
/// output, which callers treat as a signal rather than an error.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDelayAffine<R> {
    pub offsets: Vec<i32>,
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[out_dim][in_dim * offsets.len()]`.
    pub weight: Vec<R>,
    pub bias: Vec<R>,
}

impl<R: Real> TimeDelayAffine<R> {
    pub fn zeros(offsets: Vec<i32>, in_dim: usize, out_dim: usize) -> Self {
        assert!(!offsets.is_empty());
        let concat = in_dim * offsets.len();
        TimeDelayAffine {
            offsets,
            in_dim,
            out_dim,
            weight: vec![R::zero(); out_dim * concat],
            bias: vec![R::zero(); out_dim],
        }
    }

    pub fn span(&self) -> usize {
        let min = *self.offsets.iter().min().unwrap();
        let max = *self.offsets.iter().max().unwrap();
        (max - min) as usize
    }

    pub fn out_len(&self, t_in: usize) -> usize {
        t_in.saturating_sub(self.span())
    }

    /// Gathers offset rows into a `(T - span) x (in_dim * n_offsets)` matrix.
    pub fn gather(&self, x: &Mat<R>) -> Result<Mat<R>, NnError> {
        if x.cols != self.in_dim {
            return Err(NnError::Shape(format!(
                "time-delay expects width {}, got {}",
                self.in_dim, x.cols
            )));
        }
        let t_out = self.out_len(x.rows);
        let min = *self.offsets.iter().min().unwrap();
        let mut gathered = Mat::zeros(t_out, self.in_dim * self.offsets.len());
        for r in 0..t_out {
            let dst = gathered.row_mut(r);
            for (k, &off) in self.offsets.iter().enumerate() {
                let src_row = (r as i64 + i64::from(off - min)) as usize;
                dst[k * self.in_dim..(k + 1) * self.in_dim].copy_from_slice(x.row(src_row));
            }
        }
        Ok(gathered)
    }

    /// Returns the output and the gathered input (cached for backward).
    pub fn forward(&self, x: &Mat<R>) -> Result<(Mat<R>, Mat<R>), NnError> {
        let gathered = self.gather(x)?;
        let w = Mat {
            rows: self.out_dim,
            cols: gathered.cols,
            data: self.weight.clone(),
        };
        let mut y = Mat::zeros(gathered.rows, self.out_dim);
        if gathered.rows > 0 {
            matmul_nt(&gathered, &w, &mut y);
        }
        for r in 0..y.rows {
            for (v, &b) in y.row_mut(r).iter_mut().zip(self.bias.iter()) {
                *v += b;
            }
        }
        Ok((y, gathered))
    }

    pub fn backward(
        &self,
        gathered: &Mat<R>,
        grad_y: &Mat<R>,
        t_in: usize,
        grad_w: &mut [R],
        grad_b: &mut [R],
        need_gx: bool,
    ) -> Mat<R> {
        for r in 0..grad_y.rows {
            for (b, &gv) in grad_b.iter_mut().zip(grad_y.row(r).iter()) {
                *b += gv;
            }
        }
        if grad_y.rows > 0 {
            let gt = grad_y.transposed();
            let xt = gathered.transposed();
            let mut dw = Mat::zeros(self.out_dim, gathered.cols);
            matmul_nt(&gt, &xt, &mut dw);
            for (acc, v) in grad_w.iter_mut().zip(dw.data.iter()) {
                *acc += *v;
            }
        }
        if !need_gx {
            return Mat::zeros(0, 0);
        }
        let mut gx = Mat::zeros(t_in, self.in_dim);
        if grad_y.rows > 0 {
            let w = Mat {
                rows: self.out_dim,
                cols: gathered.cols,
                data: self.weight.clone(),
            };
            let wt = w.transposed();
            let mut g_gather = Mat::zeros(grad_y.rows, gathered.cols);
            matmul_nt(grad_y, &wt, &mut g_gather);
            let min = *self.offsets.iter().min().unwrap();
            for r in 0..g_gather.rows {
                let src = g_gather.row(r);
                for (k, &off) in self.offsets.iter().enumerate() {
                    let dst_row = (r as i64 + i64::from(off - min)) as usize;
                    let dst = gx.row_mut(dst_row);
                    for (d, &s) in dst.iter_mut().zip(src[k * self.in_dim..(k + 1) * self.in_dim].iter()) {
                        *d += s;
                    }
                }
            }
        }
        gx
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

// ---------------------------------------------------------------------------
// PNorm
// ---------------------------------------------------------------------------

/// Dimension-reducing group nonlinearity
/// `y[g] = (sum_{i in group g} |x_i|^p)^(1/p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PNorm {
    pub group: usize,
    pub p: f64,
}

impl PNorm {
    pub fn new(group: usize, p: f64) -> Self {
        assert!(p >= 1.0, "p-norm requires p >= 1");
        PNorm { group, p }
    }

    pub fn forward<R: Real>(&self, x: &Mat<R>) -> Result<Mat<R>, NnError> {
        if x.cols % self.group != 0 {
            return Err(NnError::Shape(format!(
                "p-norm group {} does not divide width {}",
                self.group, x.cols
            )));
        }
        let out_cols = x.cols / self.group;
        let mut y = Mat::zeros(x.rows, out_cols);
        let two = self.p == 2.0;
        for r in 0..x.rows {
            let xin = x.row(r);
            let yout = y.row_mut(r);
            for g in 0..out_cols {
                let chunk = &xin[g * self.group..(g + 1) * self.group];
                if two {
                    let mut s = R::zero();
                    for &v in chunk {
                        s += v * v;
                    }
                    yout[g] = s.sqrt();
                } else {
                    let mut s = 0.0f64;
                    for &v in chunk {
                        s += v.as_f64().abs().powf(self.p);
                    }
                    yout[g] = R::from_f64(s.powf(1.0 / self.p));
                }
            }
        }
        Ok(y)
    }

    /// `dy/dx_i = sign(x_i) |x_i|^(p-1) / y^(p-1)`, with the 0/0 case
    /// defined as 0.
    pub fn backward<R: Real>(&self, x: &Mat<R>, y: &Mat<R>, grad_y: &Mat<R>) -> Mat<R> {
        let mut gx = Mat::zeros(x.rows, x.cols);
        let two = self.p == 2.0;
        for r in 0..x.rows {
            let xin = x.row(r);
            let yrow = y.row(r);
            let grow = grad_y.row(r);
            let gxr = gx.row_mut(r);
            for g in 0..yrow.len() {
                let yv = yrow[g];
                if yv == R::zero() {
                    continue;
                }
                let gy = grow[g];
                for i in g * self.group..(g + 1) * self.group {
                    let xv = xin[i];
                    let d = if two {
                        xv / yv
                    } else {
                        let xa = xv.as_f64().abs();
                        if xa == 0.0 {
                            R::zero()
                        } else {
                            let mag = xa.powf(self.p - 1.0) / yv.as_f64().powf(self.p - 1.0);
                            R::from_f64(mag * xv.as_f64().signum())
                        }
                    };
                    gxr[i] = gy * d;
                }
            }
        }
        gx
    }
}
