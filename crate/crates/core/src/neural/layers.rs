//! Convolution and dense layers with explicit forward/backward passes over a
//! batch chunk. Activations are NHWC row-major: sample, row, column, channel.

use rand::Rng as _;

use super::tensor::{gemm, Tensor};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(&self, x: &mut [f64]) {
        if *self == Activation::Relu {
            x.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }

    /// Gates `grad` in place given the layer's post-activation output.
    fn backward(&self, output: &[f64], grad: &mut [f64]) {
        if *self == Activation::Relu {
            for (g, &o) in grad.iter_mut().zip(output) {
                if o <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

/// Fan-in scaled uniform init, U(−√(6/fan_in), √(6/fan_in)).
fn init_uniform(values: &mut [f64], fan_in: usize, rng: &mut Rng) {
    let bound = (6.0 / fan_in as f64).sqrt();
    for v in values {
        *v = rng.random_range(-bound..bound);
    }
}

/// Stride-1 2-D convolution. Weight layout is `[kh·kw·in, out]` so the
/// forward pass is one GEMM against the im2col matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_h: usize,
    pub in_w: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub activation: Activation,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_h: usize,
        in_w: usize,
        in_ch: usize,
        out_ch: usize,
        kernel_h: usize,
        kernel_w: usize,
        pad_h: usize,
        pad_w: usize,
        activation: Activation,
    ) -> Self {
        let k = kernel_h * kernel_w * in_ch;
        Self {
            in_h,
            in_w,
            in_ch,
            out_ch,
            kernel_h,
            kernel_w,
            pad_h,
            pad_w,
            activation,
            weight: Tensor::zeros(&[k, out_ch]),
            bias: Tensor::zeros(&[out_ch]),
        }
    }

    pub fn out_h(&self) -> usize {
        self.in_h + 2 * self.pad_h + 1 - self.kernel_h
    }

    pub fn out_w(&self) -> usize {
        self.in_w + 2 * self.pad_w + 1 - self.kernel_w
    }

    pub fn patch_len(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_ch
    }

    pub fn output_len(&self) -> usize {
        self.out_h() * self.out_w() * self.out_ch
    }

    pub fn init(&mut self, rng: &mut Rng) {
        let fan_in = self.patch_len();
        init_uniform(&mut self.weight.values, fan_in, rng);
        self.bias.values.iter_mut().for_each(|b| *b = 0.0);
    }

    fn im2col(&self, batch: usize, input: &[f64]) -> Vec<f64> {
        let (oh, ow, k) = (self.out_h(), self.out_w(), self.patch_len());
        let mut cols = vec![0.0; batch * oh * ow * k];
        for b in 0..batch {
            let x = &input[b * self.in_h * self.in_w * self.in_ch..];
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = &mut cols[((b * oh + oy) * ow + ox) * k..][..k];
                    for dy in 0..self.kernel_h {
                        let iy = (oy + dy) as isize - self.pad_h as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        for dx in 0..self.kernel_w {
                            let ix = (ox + dx) as isize - self.pad_w as isize;
                            if ix < 0 || ix >= self.in_w as isize {
                                continue;
                            }
                            let src = (iy as usize * self.in_w + ix as usize) * self.in_ch;
                            let dst = (dy * self.kernel_w + dx) * self.in_ch;
                            row[dst..dst + self.in_ch].copy_from_slice(&x[src..src + self.in_ch]);
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, batch: usize, dcols: &[f64]) -> Vec<f64> {
        let (oh, ow, k) = (self.out_h(), self.out_w(), self.patch_len());
        let plane = self.in_h * self.in_w * self.in_ch;
        let mut dx = vec![0.0; batch * plane];
        for b in 0..batch {
            let d = &mut dx[b * plane..][..plane];
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = &dcols[((b * oh + oy) * ow + ox) * k..][..k];
                    for dy in 0..self.kernel_h {
                        let iy = (oy + dy) as isize - self.pad_h as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        for dxk in 0..self.kernel_w {
                            let ix = (ox + dxk) as isize - self.pad_w as isize;
                            if ix < 0 || ix >= self.in_w as isize {
                                continue;
                            }
                            let dst = (iy as usize * self.in_w + ix as usize) * self.in_ch;
                            let src = (dy * self.kernel_w + dxk) * self.in_ch;
                            for c in 0..self.in_ch {
                                d[dst + c] += row[src + c];
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    /// Returns (output, im2col cache).
    pub fn forward(&self, batch: usize, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let cols = self.im2col(batch, input);
        let rows = batch * self.out_h() * self.out_w();
        let mut out = vec![0.0; rows * self.out_ch];
        for r in out.chunks_exact_mut(self.out_ch) {
            r.copy_from_slice(&self.bias.values);
        }
        gemm(rows, self.patch_len(), self.out_ch, &cols, false, &self.weight.values, false, &mut out, true);
        self.activation.apply(&mut out);
        (out, cols)
    }

    /// Accumulates parameter gradients into `g_weight`/`g_bias`; returns the
    /// input gradient when `need_input_grad`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        batch: usize,
        cols: &[f64],
        output: &[f64],
        mut grad_out: Vec<f64>,
        g_weight: &mut [f64],
        g_bias: &mut [f64],
        need_input_grad: bool,
    ) -> Option<Vec<f64>> {
        self.activation.backward(output, &mut grad_out);
        let rows = batch * self.out_h() * self.out_w();
        let k = self.patch_len();
        gemm(k, rows, self.out_ch, cols, true, &grad_out, false, g_weight, true);
        for r in grad_out.chunks_exact(self.out_ch) {
            for (gb, g) in g_bias.iter_mut().zip(r) {
                *gb += g;
            }
        }
        need_input_grad.then(|| {
            let mut dcols = vec![0.0; rows * k];
            gemm(rows, self.out_ch, k, &grad_out, false, &self.weight.values, true, &mut dcols, false);
            self.col2im(batch, &dcols)
        })
    }
}

/// Fully connected layer, weight layout `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            weight: Tensor::zeros(&[in_dim, out_dim]),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn init(&mut self, rng: &mut Rng) {
        init_uniform(&mut self.weight.values, self.in_dim, rng);
        self.bias.values.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn forward(&self, batch: usize, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; batch * self.out_dim];
        for r in out.chunks_exact_mut(self.out_dim) {
            r.copy_from_slice(&self.bias.values);
        }
        gemm(batch, self.in_dim, self.out_dim, input, false, &self.weight.values, false, &mut out, true);
        self.activation.apply(&mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        batch: usize,
        input: &[f64],
        output: &[f64],
        mut grad_out: Vec<f64>,
        g_weight: &mut [f64],
        g_bias: &mut [f64],
        need_input_grad: bool,
    ) -> Option<Vec<f64>> {
        self.activation.backward(output, &mut grad_out);
        gemm(self.in_dim, batch, self.out_dim, input, true, &grad_out, false, g_weight, true);
        for r in grad_out.chunks_exact(self.out_dim) {
            for (gb, g) in g_bias.iter_mut().zip(r) {
                *gb += g;
            }
        }
        need_input_grad.then(|| {
            let mut dx = vec![0.0; batch * self.in_dim];
            gemm(batch, self.out_dim, self.in_dim, &grad_out, false, &self.weight.values, true, &mut dx, false);
            dx
        })
    }
}
