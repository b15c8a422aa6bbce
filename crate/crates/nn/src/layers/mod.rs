//! Layer descriptors, parameter storage and the forward/backward dispatch.

mod batchnorm;
mod conv;
mod dense;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, NnError, Result};
use crate::tensor::Tensor;

pub use batchnorm::BatchNorm;
pub use conv::{Conv2d, ConvTranspose2d};
pub use dense::Dense;

/// Zero padding added before and after each spatial axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Padding {
    pub begin: usize,
    pub end: usize,
}

impl Padding {
    pub const NONE: Padding = Padding { begin: 0, end: 0 };

    /// Keeps the spatial size at stride 1; even kernels pad one more at the end.
    pub fn same(kernel: usize) -> Self {
        let total = kernel.saturating_sub(1);
        Self {
            begin: total / 2,
            end: total - total / 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    },
    ConvTranspose2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    },
    BatchNorm {
        channels: usize,
        momentum: f64,
        epsilon: f64,
    },
    Relu,
    Dense {
        in_units: usize,
        out_units: usize,
    },
    Flatten,
    /// Per-sample target shape; the batch dimension is kept.
    Reshape {
        shape: Vec<usize>,
    },
}

fn conv_out(size: usize, kernel: usize, stride: usize, padding: Padding) -> Option<usize> {
    let padded = size + padding.begin + padding.end;
    if stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

fn conv_transpose_out(size: usize, kernel: usize, stride: usize, padding: Padding) -> Option<usize> {
    ((size - 1) * stride + kernel).checked_sub(padding.begin + padding.end).filter(|&s| s > 0 && stride > 0)
}

impl LayerSpec {
    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |expected: String| shape_mismatch("LayerSpec::output_shape", expected, input);
        match self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            }
            | LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let &[c, h, w] = input else {
                    return Err(bad(format!("[{in_channels}, H, W]")));
                };
                if c != *in_channels {
                    return Err(bad(format!("[{in_channels}, H, W]")));
                }
                let f = if matches!(self, LayerSpec::Conv2d { .. }) {
                    conv_out
                } else {
                    conv_transpose_out
                };
                match (f(h, *kernel, *stride, *padding), f(w, *kernel, *stride, *padding)) {
                    (Some(ho), Some(wo)) => Ok(vec![*out_channels, ho, wo]),
                    _ => Err(bad(format!("spatial size compatible with kernel {kernel}"))),
                }
            }
            LayerSpec::BatchNorm { channels, .. } => {
                if input.first() != Some(channels) {
                    return Err(bad(format!("[{channels}, ...]")));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Dense { in_units, out_units } => {
                if input != [*in_units] {
                    return Err(bad(format!("[{in_units}]")));
                }
                Ok(vec![*out_units])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { shape } => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return Err(bad(format!("{} elements", shape.iter().product::<usize>())));
                }
                Ok(shape.clone())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(NnError::InvalidConfig(format!("{self:?}: {m}")));
        match self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            }
            | LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                if *in_channels == 0 || *out_channels == 0 || *kernel == 0 || *stride == 0 {
                    return err("channels, kernel and stride must be positive");
                }
            }
            LayerSpec::BatchNorm {
                channels,
                momentum,
                epsilon,
            } => {
                if *channels == 0 || !(0.0..=1.0).contains(momentum) || !(*epsilon > 0.0) {
                    return err("needs channels > 0, momentum in [0,1], epsilon > 0");
                }
            }
            LayerSpec::Dense { in_units, out_units } => {
                if *in_units == 0 || *out_units == 0 {
                    return err("units must be positive");
                }
            }
            LayerSpec::Reshape { shape } => {
                if shape.is_empty() || shape.contains(&0) {
                    return err("empty or zero extent");
                }
            }
            LayerSpec::Relu | LayerSpec::Flatten => {}
        }
        Ok(())
    }
}

/// A trainable tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }

    fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let mut value = Tensor::zeros(shape);
        for v in value.data_mut() {
            *v = rng.random_range(-bound..bound);
        }
        Self::new(value)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Values saved by a training-mode forward pass for the backward pass.
#[derive(Clone, Debug)]
pub enum Cache {
    Input(Tensor),
    BatchNorm {
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    Mask(Vec<bool>),
    Shape(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    ConvTranspose2d(ConvTranspose2d),
    BatchNorm(BatchNorm),
    Relu,
    Dense(Dense),
    Flatten,
    Reshape(Vec<usize>),
}

impl Layer {
    /// Builds a freshly initialized layer. Weights and biases are drawn from
    /// `U(±1/√fan_in)`; batch-norm starts at unit scale, zero shift.
    pub fn from_spec(spec: &LayerSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        Ok(match spec {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => Layer::Conv2d(Conv2d::init(*in_channels, *out_channels, *kernel, *stride, *padding, rng)),
            LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => Layer::ConvTranspose2d(ConvTranspose2d::init(
                *in_channels,
                *out_channels,
                *kernel,
                *stride,
                *padding,
                rng,
            )),
            LayerSpec::BatchNorm {
                channels,
                momentum,
                epsilon,
            } => Layer::BatchNorm(BatchNorm::new(*channels, *momentum, *epsilon)),
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::Dense { in_units, out_units } => Layer::Dense(Dense::init(*in_units, *out_units, rng)),
            LayerSpec::Flatten => Layer::Flatten,
            LayerSpec::Reshape { shape } => Layer::Reshape(shape.clone()),
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv2d(c) => LayerSpec::Conv2d {
                in_channels: c.in_channels(),
                out_channels: c.out_channels(),
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
            },
            Layer::ConvTranspose2d(c) => LayerSpec::ConvTranspose2d {
                in_channels: c.in_channels(),
                out_channels: c.out_channels(),
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
            },
            Layer::BatchNorm(b) => LayerSpec::BatchNorm {
                channels: b.channels(),
                momentum: b.momentum,
                epsilon: b.epsilon,
            },
            Layer::Relu => LayerSpec::Relu,
            Layer::Dense(d) => LayerSpec::Dense {
                in_units: d.in_units(),
                out_units: d.out_units(),
            },
            Layer::Flatten => LayerSpec::Flatten,
            Layer::Reshape(shape) => LayerSpec::Reshape { shape: shape.clone() },
        }
    }

    /// Training-mode forward pass (batch statistics, running averages updated).
    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, Cache)> {
        match self {
            Layer::BatchNorm(b) => b.forward_train(x),
            Layer::Relu => {
                let mask: Vec<bool> = x.data().iter().map(|&v| v > 0.0).collect();
                Ok((relu(x), Cache::Mask(mask)))
            }
            Layer::Flatten | Layer::Reshape(_) => Ok((self.forward_eval(x)?, Cache::Shape(x.shape().to_vec()))),
            _ => Ok((self.forward_eval(x)?, Cache::Input(x.clone()))),
        }
    }

    /// Inference-mode forward pass; never mutates the layer.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv2d(c) => c.forward(x),
            Layer::ConvTranspose2d(c) => c.forward(x),
            Layer::BatchNorm(b) => b.forward_eval(x),
            Layer::Relu => Ok(relu(x)),
            Layer::Dense(d) => d.forward(x),
            Layer::Flatten => {
                let n = x.batch();
                x.clone().reshape(&[n, x.row_len()])
            }
            Layer::Reshape(shape) => {
                let mut full = vec![x.batch()];
                full.extend_from_slice(shape);
                x.clone().reshape(&full)
            }
        }
    }

    /// Returns the gradient with respect to the input and accumulates
    /// parameter gradients.
    pub fn backward(&mut self, cache: &Cache, dy: &Tensor) -> Result<Tensor> {
        match (self, cache) {
            (Layer::Conv2d(c), Cache::Input(x)) => c.backward(x, dy),
            (Layer::ConvTranspose2d(c), Cache::Input(x)) => c.backward(x, dy),
            (Layer::Dense(d), Cache::Input(x)) => d.backward(x, dy),
            (Layer::BatchNorm(b), Cache::BatchNorm { xhat, inv_std }) => b.backward(xhat, inv_std, dy),
            (Layer::Relu, Cache::Mask(mask)) => {
                if mask.len() != dy.len() {
                    return Err(shape_mismatch("relu backward", mask.len(), dy.len()));
                }
                let mut dx = dy.clone();
                for (v, &m) in dx.data_mut().iter_mut().zip(mask) {
                    if !m {
                        *v = 0.0;
                    }
                }
                Ok(dx)
            }
            (Layer::Flatten | Layer::Reshape(_), Cache::Shape(shape)) => dy.clone().reshape(shape),
            (layer, cache) => Err(NnError::InvalidConfig(format!(
                "cache {} does not belong to layer {:?}",
                cache_name(cache),
                layer.spec()
            ))),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Conv2d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::ConvTranspose2d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            Layer::Relu | Layer::Flatten | Layer::Reshape(_) => Vec::new(),
        }
    }

    /// Every persisted tensor (parameters and running statistics) by name.
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Conv2d(c) => vec![("weight", &c.weight.value), ("bias", &c.bias.value)],
            Layer::ConvTranspose2d(c) => vec![("weight", &c.weight.value), ("bias", &c.bias.value)],
            Layer::Dense(d) => vec![("weight", &d.weight.value), ("bias", &d.bias.value)],
            Layer::BatchNorm(b) => vec![
                ("gamma", &b.gamma.value),
                ("beta", &b.beta.value),
                ("running_mean", &b.running_mean),
                ("running_var", &b.running_var),
            ],
            Layer::Relu | Layer::Flatten | Layer::Reshape(_) => Vec::new(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            Layer::Conv2d(c) => vec![("weight", &mut c.weight.value), ("bias", &mut c.bias.value)],
            Layer::ConvTranspose2d(c) => vec![("weight", &mut c.weight.value), ("bias", &mut c.bias.value)],
            Layer::Dense(d) => vec![("weight", &mut d.weight.value), ("bias", &mut d.bias.value)],
            Layer::BatchNorm(b) => vec![
                ("gamma", &mut b.gamma.value),
                ("beta", &mut b.beta.value),
                ("running_mean", &mut b.running_mean),
                ("running_var", &mut b.running_var),
            ],
            Layer::Relu | Layer::Flatten | Layer::Reshape(_) => Vec::new(),
        }
    }
}

fn cache_name(cache: &Cache) -> &'static str {
    match cache {
        Cache::Input(_) => "Input",
        Cache::BatchNorm { .. } => "BatchNorm",
        Cache::Mask(_) => "Mask",
        Cache::Shape(_) => "Shape",
    }
}

fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_splits_odd_remainder_to_the_end() {
        assert_eq!(Padding::same(1), Padding::NONE);
        assert_eq!(Padding::same(2), Padding { begin: 0, end: 1 });
        assert_eq!(Padding::same(3), Padding { begin: 1, end: 1 });
        assert_eq!(Padding::same(4), Padding { begin: 1, end: 2 });
    }

    #[test]
    fn output_shapes() {
        let conv = LayerSpec::Conv2d {
            in_channels: 2,
            out_channels: 16,
            kernel: 4,
            stride: 1,
            padding: Padding::same(4),
        };
        assert_eq!(conv.output_shape(&[2, 16, 16]).unwrap(), vec![16, 16, 16]);
        assert!(conv.output_shape(&[3, 16, 16]).is_err());
        let convt = LayerSpec::ConvTranspose2d {
            in_channels: 64,
            out_channels: 32,
            kernel: 2,
            stride: 1,
            padding: Padding::same(2),
        };
        assert_eq!(convt.output_shape(&[64, 4, 4]).unwrap(), vec![32, 4, 4]);
        let valid = LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 1,
            kernel: 3,
            stride: 2,
            padding: Padding::NONE,
        };
        assert_eq!(valid.output_shape(&[1, 7, 5]).unwrap(), vec![1, 3, 2]);
        assert!(LayerSpec::Dense { in_units: 4, out_units: 2 }.output_shape(&[5]).is_err());
        assert_eq!(LayerSpec::Flatten.output_shape(&[64, 4, 4]).unwrap(), vec![1024]);
    }

    #[test]
    fn relu_semantics() {
        let x = Tensor::new(vec![1, 4], vec![-2.0, -0.0, 0.5, 3.0]).unwrap();
        let mut layer = Layer::Relu;
        let (y, cache) = layer.forward_train(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 0.5, 3.0]);
        let dx = layer.backward(&cache, &Tensor::filled(&[1, 4], 1.0)).unwrap();
        assert_eq!(dx.data(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn mismatched_cache_is_an_error() {
        let mut layer = Layer::Relu;
        let dy = Tensor::zeros(&[1, 2]);
        assert!(layer.backward(&Cache::Shape(vec![1, 2]), &dy).is_err());
    }
}
