use rand::Rng;

use super::{Padding, Param};
use crate::error::{shape_mismatch, Result};
use crate::gemm::{channel_major_to_nchw, gemm, nchw_to_channel_major, Geometry};
use crate::tensor::Tensor;

fn image_dims(x: &Tensor, channels: usize, op: &'static str) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [n, c, h, w] if c == channels => Ok((n, h, w)),
        _ => Err(shape_mismatch(op, format!("[N, {channels}, H, W]"), x.shape())),
    }
}

fn add_channel_bias(y: &mut [f64], bias: &[f64], positions: usize) {
    for (chunk, b) in y.chunks_mut(positions).zip(bias.iter().cycle()) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn accumulate_channel_sums(grad: &mut [f64], dy: &[f64], positions: usize) {
    let channels = grad.len();
    for (i, chunk) in dy.chunks(positions).enumerate() {
        grad[i % channels] += chunk.iter().sum::<f64>();
    }
}

/// 2-D cross-correlation. Weight layout `[out, in, k, k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl Conv2d {
    pub(crate) fn init(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = 1.0 / ((in_channels * kernel * kernel) as f64).sqrt();
        Self {
            weight: Param::uniform(&[out_channels, in_channels, kernel, kernel], bound, rng),
            bias: Param::uniform(&[out_channels], bound, rng),
            kernel,
            stride,
            padding,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    fn geometry(&self, x: &Tensor) -> Result<Geometry> {
        let (n, h, w) = image_dims(x, self.in_channels(), "conv2d")?;
        let k = self.kernel;
        let pad = self.padding.begin + self.padding.end;
        if h + pad < k || w + pad < k {
            return Err(shape_mismatch("conv2d", format!("spatial size ≥ {k} after padding"), x.shape()));
        }
        Ok(Geometry {
            batch: n,
            channels: self.in_channels(),
            height: h,
            width: w,
            kernel: k,
            stride: self.stride,
            pad_begin: self.padding.begin,
            out_height: (h + pad - k) / self.stride + 1,
            out_width: (w + pad - k) / self.stride + 1,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let g = self.geometry(x)?;
        let cols = g.im2col(x.data());
        let o = self.out_channels();
        let np = g.batch * g.positions();
        let mut out = vec![0.0; o * np];
        gemm(o, g.patch_len(), np, self.weight.value.data(), false, &cols, false, 0.0, &mut out);
        let mut y = channel_major_to_nchw(&out, o, g.batch, g.positions());
        add_channel_bias(&mut y, self.bias.value.data(), g.positions());
        Tensor::new(vec![g.batch, o, g.out_height, g.out_width], y)
    }

    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let g = self.geometry(x)?;
        let o = self.out_channels();
        let expected = [g.batch, o, g.out_height, g.out_width];
        if dy.shape() != expected {
            return Err(shape_mismatch("conv2d backward", expected, dy.shape()));
        }
        let np = g.batch * g.positions();
        let kk = g.patch_len();
        let cols = g.im2col(x.data());
        let dy_cm = nchw_to_channel_major(dy.data(), o, g.batch, g.positions());
        gemm(o, np, kk, &dy_cm, false, &cols, true, 1.0, self.weight.grad.data_mut());
        accumulate_channel_sums(self.bias.grad.data_mut(), dy.data(), g.positions());
        let mut dcols = vec![0.0; kk * np];
        gemm(kk, o, np, self.weight.value.data(), true, &dy_cm, false, 0.0, &mut dcols);
        Tensor::new(x.shape().to_vec(), g.col2im(&dcols))
    }
}

/// Transposed convolution: the exact adjoint of [`Conv2d`] with the same
/// kernel, stride and padding. Weight layout `[in, out, k, k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose2d {
    pub weight: Param,
    pub bias: Param,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl ConvTranspose2d {
    pub(crate) fn init(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = 1.0 / ((out_channels * kernel * kernel) as f64).sqrt();
        Self {
            weight: Param::uniform(&[in_channels, out_channels, kernel, kernel], bound, rng),
            bias: Param::uniform(&[out_channels], bound, rng),
            kernel,
            stride,
            padding,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }

    /// Geometry of the forward convolution this layer transposes: its input is
    /// our output and vice versa.
    fn geometry(&self, x: &Tensor) -> Result<Geometry> {
        let (n, h, w) = image_dims(x, self.in_channels(), "conv_transpose2d")?;
        let k = self.kernel;
        let out = |s: usize| ((s - 1) * self.stride + k).checked_sub(self.padding.begin + self.padding.end);
        match (out(h), out(w)) {
            (Some(ho), Some(wo)) if ho > 0 && wo > 0 => Ok(Geometry {
                batch: n,
                channels: self.out_channels(),
                height: ho,
                width: wo,
                kernel: k,
                stride: self.stride,
                pad_begin: self.padding.begin,
                out_height: h,
                out_width: w,
            }),
            _ => Err(shape_mismatch("conv_transpose2d", "larger spatial size", x.shape())),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let g = self.geometry(x)?;
        let ci = self.in_channels();
        let np = g.batch * g.positions();
        let kk = g.patch_len();
        let x_cm = nchw_to_channel_major(x.data(), ci, g.batch, g.positions());
        let mut cols = vec![0.0; kk * np];
        gemm(kk, ci, np, self.weight.value.data(), true, &x_cm, false, 0.0, &mut cols);
        let mut y = g.col2im(&cols);
        add_channel_bias(&mut y, self.bias.value.data(), g.height * g.width);
        Tensor::new(vec![g.batch, g.channels, g.height, g.width], y)
    }

    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let g = self.geometry(x)?;
        let expected = [g.batch, g.channels, g.height, g.width];
        if dy.shape() != expected {
            return Err(shape_mismatch("conv_transpose2d backward", expected, dy.shape()));
        }
        let ci = self.in_channels();
        let np = g.batch * g.positions();
        let kk = g.patch_len();
        let x_cm = nchw_to_channel_major(x.data(), ci, g.batch, g.positions());
        let dcols = g.im2col(dy.data());
        gemm(ci, np, kk, &x_cm, false, &dcols, true, 1.0, self.weight.grad.data_mut());
        accumulate_channel_sums(self.bias.grad.data_mut(), dy.data(), g.height * g.width);
        let mut dx_cm = vec![0.0; ci * np];
        gemm(ci, kk, np, self.weight.value.data(), false, &dcols, false, 0.0, &mut dx_cm);
        Tensor::new(x.shape().to_vec(), channel_major_to_nchw(&dx_cm, ci, g.batch, g.positions()))
    }
}
