//! Layer kernels with explicit forward and backward passes.

use super::tensor::Tensor4;
use crate::error::{Error, Result};

/// 3x3 convolution (cross-correlation), stride 1, one pixel of zero padding.
///
/// Weights are stored as a `(3 * 3 * cin) x cout` matrix whose rows are
/// ordered `(ky, kx, ci)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub cin: usize,
    pub cout: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv3x3 {
    pub fn new(cin: usize, cout: usize) -> Self {
        Self {
            cin,
            cout,
            weight: vec![0.0; 9 * cin * cout],
            bias: vec![0.0; cout],
        }
    }

    #[inline]
    pub fn weight_index(&self, ky: usize, kx: usize, ci: usize, co: usize) -> usize {
        ((ky * 3 + kx) * self.cin + ci) * self.cout + co
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        if x.k != self.cin {
            return Err(Error::mismatch(
                format!("{} input channels", self.cin),
                format!("{} channels", x.k),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check_input(x)?;
        let mut patches = Vec::new();
        im2col(x, &mut patches);
        let rows = x.positions();
        let inner = 9 * self.cin;
        let mut out = Tensor4::zeros(x.n, x.h, x.w, self.cout);
        for row in out.data.chunks_exact_mut(self.cout) {
            row.copy_from_slice(&self.bias);
        }
        // SAFETY: slices are sized rows*inner, inner*cout, rows*cout with
        // matching row-major strides.
        unsafe {
            matrixmultiply::sgemm(
                rows,
                inner,
                self.cout,
                1.0,
                patches.as_ptr(),
                inner as isize,
                1,
                self.weight.as_ptr(),
                self.cout as isize,
                1,
                1.0,
                out.data.as_mut_ptr(),
                self.cout as isize,
                1,
            );
        }
        Ok(out)
    }

    /// Returns `(dx, dweight, dbias)` for upstream gradient `dy`.
    pub fn backward(&self, x: &Tensor4, dy: &Tensor4) -> Result<(Tensor4, Vec<f32>, Vec<f32>)> {
        self.check_input(x)?;
        if dy.shape() != (x.n, x.h, x.w, self.cout) {
            return Err(Error::mismatch(
                format!("{:?}", (x.n, x.h, x.w, self.cout)),
                format!("{:?}", dy.shape()),
            ));
        }
        let rows = x.positions();
        let inner = 9 * self.cin;
        let mut patches = Vec::new();
        im2col(x, &mut patches);

        let mut dbias64 = vec![0f64; self.cout];
        for row in dy.data.chunks_exact(self.cout) {
            for (acc, &g) in dbias64.iter_mut().zip(row) {
                *acc += g as f64;
            }
        }
        let dbias = dbias64.into_iter().map(|v| v as f32).collect();

        let mut dweight = vec![0f32; inner * self.cout];
        let mut dpatches = vec![0f32; rows * inner];
        // SAFETY: dweight = patches^T * dy and dpatches = dy * weight^T, with
        // strides describing the transposes of row-major buffers.
        unsafe {
            matrixmultiply::sgemm(
                inner,
                rows,
                self.cout,
                1.0,
                patches.as_ptr(),
                1,
                inner as isize,
                dy.data.as_ptr(),
                self.cout as isize,
                1,
                0.0,
                dweight.as_mut_ptr(),
                self.cout as isize,
                1,
            );
            matrixmultiply::sgemm(
                rows,
                self.cout,
                inner,
                1.0,
                dy.data.as_ptr(),
                self.cout as isize,
                1,
                self.weight.as_ptr(),
                1,
                self.cout as isize,
                0.0,
                dpatches.as_mut_ptr(),
                inner as isize,
                1,
            );
        }
        let dx = col2im(&dpatches, x.n, x.h, x.w, x.k);
        Ok((dx, dweight, dbias))
    }
}

/// Unfolds every 3x3 zero-padded neighbourhood into one row of `9 * K`
/// values ordered `(ky, kx, c)`.
fn im2col(x: &Tensor4, out: &mut Vec<f32>) {
    let (n, h, w, k) = x.shape();
    out.clear();
    out.resize(n * h * w * 9 * k, 0.0);
    let mut row = 0;
    for b in 0..n {
        for y in 0..h {
            for xx in 0..w {
                let base = row * 9 * k;
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let src = ((b * h + sy as usize) * w + sx as usize) * k;
                        let dst = base + (ky * 3 + kx) * k;
                        out[dst..dst + k].copy_from_slice(&x.data[src..src + k]);
                    }
                }
                row += 1;
            }
        }
    }
}

fn col2im(cols: &[f32], n: usize, h: usize, w: usize, k: usize) -> Tensor4 {
    let mut dx = Tensor4::zeros(n, h, w, k);
    let mut row = 0;
    for b in 0..n {
        for y in 0..h {
            for xx in 0..w {
                let base = row * 9 * k;
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let dst = ((b * h + sy as usize) * w + sx as usize) * k;
                        let src = base + (ky * 3 + kx) * k;
                        for (d, s) in dx.data[dst..dst + k].iter_mut().zip(&cols[src..src + k]) {
                            *d += s;
                        }
                    }
                }
                row += 1;
            }
        }
    }
    dx
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
}

/// Intermediates of a training-mode batch-norm pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    normalized: Vec<f32>,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
        }
    }

    pub fn trainable_count(&self) -> usize {
        2 * self.channels
    }

    pub fn running_count(&self) -> usize {
        2 * self.channels
    }

    fn check(&self, x: &Tensor4) -> Result<()> {
        if x.k != self.channels {
            return Err(Error::mismatch(
                format!("{} channels", self.channels),
                format!("{} channels", x.k),
            ));
        }
        Ok(())
    }

    /// Eval mode: normalize with running statistics.
    pub fn forward_eval(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check(x)?;
        let k = self.channels;
        let scale: Vec<f32> = (0..k)
            .map(|c| (self.gamma[c] as f64 / (self.running_var[c] as f64 + BN_EPS).sqrt()) as f32)
            .collect();
        let shift: Vec<f32> = (0..k)
            .map(|c| self.beta[c] - self.running_mean[c] * scale[c])
            .collect();
        let mut out = x.clone();
        for row in out.data.chunks_exact_mut(k) {
            for c in 0..k {
                row[c] = row[c] * scale[c] + shift[c];
            }
        }
        Ok(out)
    }

    /// Train mode: normalize with biased batch statistics over `(N, H, W)`
    /// and fold them into the running statistics.
    pub fn forward_train(&mut self, x: &Tensor4) -> Result<(Tensor4, BatchNormCache)> {
        self.check(x)?;
        let k = self.channels;
        let m = x.positions() as f64;
        let mut mean = vec![0f64; k];
        for row in x.data.chunks_exact(k) {
            for c in 0..k {
                mean[c] += row[c] as f64;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let mut var = vec![0f64; k];
        for row in x.data.chunks_exact(k) {
            for c in 0..k {
                let d = row[c] as f64 - mean[c];
                var[c] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= m);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();

        let mut normalized = Vec::with_capacity(x.data.len());
        let mut out = Tensor4::zeros(x.n, x.h, x.w, k);
        for (row, orow) in x.data.chunks_exact(k).zip(out.data.chunks_exact_mut(k)) {
            for c in 0..k {
                let xn = ((row[c] as f64 - mean[c]) * inv_std[c]) as f32;
                normalized.push(xn);
                orow[c] = self.gamma[c] * xn + self.beta[c];
            }
        }
        for c in 0..k {
            self.running_mean[c] =
                BN_MOMENTUM * self.running_mean[c] + (1.0 - BN_MOMENTUM) * mean[c] as f32;
            self.running_var[c] =
                BN_MOMENTUM * self.running_var[c] + (1.0 - BN_MOMENTUM) * var[c] as f32;
        }
        Ok((out, BatchNormCache { normalized, inv_std }))
    }

    /// Returns `(dx, dgamma, dbeta)`.
    pub fn backward(&self, cache: &BatchNormCache, dy: &Tensor4) -> (Tensor4, Vec<f32>, Vec<f32>) {
        let k = self.channels;
        let m = dy.positions() as f64;
        let mut sum_dy = vec![0f64; k];
        let mut sum_dy_xn = vec![0f64; k];
        for (g, xn) in dy.data.chunks_exact(k).zip(cache.normalized.chunks_exact(k)) {
            for c in 0..k {
                sum_dy[c] += g[c] as f64;
                sum_dy_xn[c] += g[c] as f64 * xn[c] as f64;
            }
        }
        let mut dx = Tensor4::zeros(dy.n, dy.h, dy.w, k);
        for ((g, xn), d) in dy
            .data
            .chunks_exact(k)
            .zip(cache.normalized.chunks_exact(k))
            .zip(dx.data.chunks_exact_mut(k))
        {
            for c in 0..k {
                let scale = self.gamma[c] as f64 * cache.inv_std[c] / m;
                d[c] = (scale
                    * (m * g[c] as f64 - sum_dy[c] - xn[c] as f64 * sum_dy_xn[c]))
                    as f32;
            }
        }
        let dgamma = sum_dy_xn.iter().map(|&v| v as f32).collect();
        let dbeta = sum_dy.iter().map(|&v| v as f32).collect();
        (dx, dgamma, dbeta)
    }
}

pub fn relu(x: &Tensor4) -> Tensor4 {
    let mut out = x.clone();
    out.data.iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Gradient of ReLU given its output.
pub fn relu_backward(out: &Tensor4, dy: &Tensor4) -> Tensor4 {
    let mut dx = dy.clone();
    for (d, &o) in dx.data.iter_mut().zip(&out.data) {
        if o <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

#[inline]
pub fn sigmoid_scalar(z: f32) -> f32 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor4) -> Tensor4 {
    let mut out = x.clone();
    out.data.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
    out
}

/// Gradient of the sigmoid given its output.
pub fn sigmoid_backward(out: &Tensor4, dy: &Tensor4) -> Tensor4 {
    let mut dx = dy.clone();
    for (d, &p) in dx.data.iter_mut().zip(&out.data) {
        *d *= p * (1.0 - p);
    }
    dx
}

pub const BCE_CLAMP: f64 = 1e-7;

fn check_targets(pred: &Tensor4, target: &Tensor4) -> Result<()> {
    pred.same_shape(target)?;
    if target.data.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::InvalidArgument("BCE targets must be 0 or 1".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy with predictions clamped to
/// `[1e-7, 1 - 1e-7]`, accumulated in 64 bits.
pub fn bce_loss(pred: &Tensor4, target: &Tensor4) -> Result<f64> {
    check_targets(pred, target)?;
    let mut sum = 0f64;
    for (&p, &y) in pred.data.iter().zip(&target.data) {
        let p = (p as f64).clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        sum -= if y == 1.0 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(sum / pred.data.len() as f64)
}

/// Gradient of [`bce_loss`] with respect to the predictions; zero where the
/// clamp is active.
#[allow(clippy::manual_range_contains)]
pub fn bce_grad(pred: &Tensor4, target: &Tensor4) -> Result<Tensor4> {
    check_targets(pred, target)?;
    let m = pred.data.len() as f64;
    let mut g = pred.clone();
    for (d, (&p, &y)) in g.data.iter_mut().zip(pred.data.iter().zip(&target.data)) {
        let p = p as f64;
        // Written out so that a NaN prediction propagates instead of being clamped.
        *d = if p < BCE_CLAMP || p > 1.0 - BCE_CLAMP {
            0.0
        } else if y == 1.0 {
            (-1.0 / (p * m)) as f32
        } else {
            (1.0 / ((1.0 - p) * m)) as f32
        };
    }
    Ok(g)
}
