use super::{Cache, Param};
use crate::error::{shape_mismatch, NnError, Result};
use crate::tensor::Tensor;

/// Per-channel batch normalization over `[N, C, ...]` inputs.
///
/// Running variance tracks the unbiased batch variance; normalization in
/// training mode uses the biased one.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNorm {
    pub(crate) fn new(channels: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: Param::new(Tensor::filled(&[channels], 1.0)),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
            momentum,
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    /// (batch, spatial size per channel)
    fn dims(&self, x: &Tensor) -> Result<(usize, usize)> {
        let c = self.channels();
        if x.shape().len() < 2 || x.shape()[1] != c {
            return Err(shape_mismatch("batch_norm", format!("[N, {c}, ...]"), x.shape()));
        }
        Ok((x.batch(), x.shape()[2..].iter().product()))
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, Cache)> {
        let (n, s) = self.dims(x)?;
        if n < 2 {
            return Err(NnError::BatchTooSmall(n));
        }
        let c = self.channels();
        let count = (n * s) as f64;
        let data = x.data();
        let mut xhat = Tensor::zeros(x.shape());
        let mut y = Tensor::zeros(x.shape());
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let blocks = (0..n).map(|i| (i * c + ch) * s);
            let mean = blocks.clone().map(|b| data[b..b + s].iter().sum::<f64>()).sum::<f64>() / count;
            let var = blocks
                .clone()
                .map(|b| data[b..b + s].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
                .sum::<f64>()
                / count;
            let is = 1.0 / (var + self.epsilon).sqrt();
            inv_std[ch] = is;
            let (g, b) = (self.gamma.value.data()[ch], self.beta.value.data()[ch]);
            for base in blocks {
                for j in base..base + s {
                    let h = (data[j] - mean) * is;
                    xhat.data_mut()[j] = h;
                    y.data_mut()[j] = g * h + b;
                }
            }
            let m = self.momentum;
            let unbiased = var * count / (count - 1.0).max(1.0);
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = (1.0 - m) * *rm + m * mean;
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = (1.0 - m) * *rv + m * unbiased;
        }
        Ok((y, Cache::BatchNorm { xhat, inv_std }))
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let (n, s) = self.dims(x)?;
        let c = self.channels();
        let mut y = x.clone();
        for i in 0..n {
            for ch in 0..c {
                let is = 1.0 / (self.running_var.data()[ch] + self.epsilon).sqrt();
                let scale = self.gamma.value.data()[ch] * is;
                let shift = self.beta.value.data()[ch] - self.running_mean.data()[ch] * scale;
                let base = (i * c + ch) * s;
                for v in &mut y.data_mut()[base..base + s] {
                    *v = *v * scale + shift;
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, xhat: &Tensor, inv_std: &[f64], dy: &Tensor) -> Result<Tensor> {
        if dy.shape() != xhat.shape() {
            return Err(shape_mismatch("batch_norm backward", xhat.shape(), dy.shape()));
        }
        let (n, s) = self.dims(dy)?;
        let c = self.channels();
        let count = (n * s) as f64;
        let mut dx = Tensor::zeros(dy.shape());
        for ch in 0..c {
            let g = self.gamma.value.data()[ch];
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for i in 0..n {
                let base = (i * c + ch) * s;
                for j in base..base + s {
                    sum_dy += dy.data()[j];
                    sum_dy_xhat += dy.data()[j] * xhat.data()[j];
                }
            }
            self.gamma.grad.data_mut()[ch] += sum_dy_xhat;
            self.beta.grad.data_mut()[ch] += sum_dy;
            let k = g * inv_std[ch] / count;
            for i in 0..n {
                let base = (i * c + ch) * s;
                for j in base..base + s {
                    dx.data_mut()[j] = k * (count * dy.data()[j] - sum_dy - xhat.data()[j] * sum_dy_xhat);
                }
            }
        }
        Ok(dx)
    }
}
