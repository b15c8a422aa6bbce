use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, NnError, Result};
use crate::layers::{Cache, Layer, LayerSpec, Padding, Param};
use crate::tensor::Tensor;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;

/// Layer stack description: a shared trunk, optionally followed by parallel
/// branches whose (1-D) outputs are concatenated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Per-sample input shape.
    pub input_shape: Vec<usize>,
    pub trunk: Vec<LayerSpec>,
    #[serde(default)]
    pub branches: Vec<Vec<LayerSpec>>,
}

/// Convolutional autoencoder over `channels × side × side` images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderShape {
    pub side: usize,
    pub channels: usize,
    pub kernel: usize,
    pub latent: usize,
    /// Encoder widths; the decoder mirrors them.
    pub widths: Vec<usize>,
    /// Batch normalization after every hidden convolution.
    #[serde(default = "default_true")]
    pub batch_norm: bool,
}

fn default_true() -> bool {
    true
}

/// Dense trunk of width `inputs · width_factor` followed by `branches` heads,
/// each `Dense(→ trunk/2) → ReLU → Dense(→ 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedForwardShape {
    pub inputs: usize,
    pub width_factor: usize,
    pub branches: usize,
}

impl NetworkConfig {
    /// Encoder: `[conv → ReLU → BN] × widths`, flatten, dense to the latent
    /// width. Decoder: dense back, reshape, transposed convs mirroring the
    /// encoder with a linear final layer producing the input channels.
    pub fn autoencoder(shape: &AutoencoderShape) -> Result<Self> {
        let AutoencoderShape {
            side,
            channels,
            kernel,
            latent,
            ref widths,
            batch_norm,
        } = *shape;
        if widths.is_empty() {
            return Err(NnError::InvalidConfig("autoencoder needs at least one encoder width".into()));
        }
        let padding = Padding::same(kernel);
        let bn = |channels| LayerSpec::BatchNorm {
            channels,
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
        };
        let mut trunk = Vec::new();
        let mut prev = channels;
        for &w in widths {
            trunk.push(LayerSpec::Conv2d {
                in_channels: prev,
                out_channels: w,
                kernel,
                stride: 1,
                padding,
            });
            trunk.push(LayerSpec::Relu);
            if batch_norm {
                trunk.push(bn(w));
            }
            prev = w;
        }
        let flat = prev * side * side;
        trunk.push(LayerSpec::Flatten);
        trunk.push(LayerSpec::Dense {
            in_units: flat,
            out_units: latent,
        });
        trunk.push(LayerSpec::Dense {
            in_units: latent,
            out_units: flat,
        });
        trunk.push(LayerSpec::Reshape {
            shape: vec![prev, side, side],
        });
        let decoder_widths: Vec<usize> = widths.iter().rev().skip(1).copied().chain([channels]).collect();
        let last = decoder_widths.len() - 1;
        for (i, &w) in decoder_widths.iter().enumerate() {
            trunk.push(LayerSpec::ConvTranspose2d {
                in_channels: prev,
                out_channels: w,
                kernel,
                stride: 1,
                padding,
            });
            if i != last {
                trunk.push(LayerSpec::Relu);
                if batch_norm {
                    trunk.push(bn(w));
                }
            }
            prev = w;
        }
        let config = Self {
            input_shape: vec![channels, side, side],
            trunk,
            branches: Vec::new(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn feed_forward(shape: &FeedForwardShape) -> Result<Self> {
        let width = shape.inputs * shape.width_factor;
        let half = (width / 2).max(1);
        if shape.branches == 0 {
            return Err(NnError::InvalidConfig("feed-forward network needs at least one branch".into()));
        }
        let branch = vec![
            LayerSpec::Dense {
                in_units: width,
                out_units: half,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                in_units: half,
                out_units: 1,
            },
        ];
        let config = Self {
            input_shape: vec![shape.inputs],
            trunk: vec![
                LayerSpec::Dense {
                    in_units: shape.inputs,
                    out_units: width,
                },
                LayerSpec::Relu,
            ],
            branches: vec![branch; shape.branches],
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks that consecutive layer shapes compose; returns the per-sample
    /// output shape.
    pub fn validate(&self) -> Result<Vec<usize>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(NnError::InvalidConfig(format!("input shape {:?}", self.input_shape)));
        }
        let run = |start: &[usize], layers: &[LayerSpec]| -> Result<Vec<usize>> {
            let mut shape = start.to_vec();
            for (i, spec) in layers.iter().enumerate() {
                spec.validate()?;
                shape = spec
                    .output_shape(&shape)
                    .map_err(|e| NnError::InvalidConfig(format!("layer {i} ({spec:?}): {e}")))?;
            }
            Ok(shape)
        };
        let trunk_out = run(&self.input_shape, &self.trunk)?;
        if self.branches.is_empty() {
            return Ok(trunk_out);
        }
        let mut total = 0;
        for (b, branch) in self.branches.iter().enumerate() {
            match run(&trunk_out, branch)?.as_slice() {
                [n] => total += n,
                other => {
                    return Err(NnError::InvalidConfig(format!(
                        "branch {b} must end in a flat output, got {other:?}"
                    )))
                }
            }
        }
        Ok(vec![total])
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.validate().expect("validated at construction")
    }
}

/// Saved activations of one training-mode forward pass.
pub struct Trace {
    trunk: Vec<Cache>,
    branches: Vec<Vec<Cache>>,
    branch_widths: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    trunk: Vec<Layer>,
    branches: Vec<Vec<Layer>>,
}

fn build(specs: &[LayerSpec], rng: &mut ChaCha8Rng) -> Result<Vec<Layer>> {
    specs.iter().map(|s| Layer::from_spec(s, rng)).collect()
}

fn check_input(config: &NetworkConfig, x: &Tensor) -> Result<()> {
    if x.shape().len() != config.input_shape.len() + 1 || x.shape()[1..] != config.input_shape[..] {
        return Err(shape_mismatch("network input", format!("[N, {:?}]", config.input_shape), x.shape()));
    }
    x.ensure_finite("network input")
}

impl Network {
    /// Initializes all weights from a ChaCha stream seeded with `seed`.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trunk = build(&config.trunk, &mut rng)?;
        let branches = config
            .branches
            .iter()
            .map(|b| build(b, &mut rng))
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            trunk,
            branches,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn trunk(&self) -> &[Layer] {
        &self.trunk
    }

    pub fn branches(&self) -> &[Vec<Layer>] {
        &self.branches
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, Trace)> {
        check_input(&self.config, x)?;
        let mut h = x.clone();
        let mut trunk = Vec::with_capacity(self.trunk.len());
        for layer in &mut self.trunk {
            let (y, cache) = layer.forward_train(&h)?;
            trunk.push(cache);
            h = y;
        }
        if self.branches.is_empty() {
            return Ok((
                h,
                Trace {
                    trunk,
                    branches: Vec::new(),
                    branch_widths: Vec::new(),
                },
            ));
        }
        let mut outputs = Vec::with_capacity(self.branches.len());
        let mut caches = Vec::with_capacity(self.branches.len());
        for branch in &mut self.branches {
            let mut b = h.clone();
            let mut bc = Vec::with_capacity(branch.len());
            for layer in branch.iter_mut() {
                let (y, cache) = layer.forward_train(&b)?;
                bc.push(cache);
                b = y;
            }
            outputs.push(b);
            caches.push(bc);
        }
        let widths = outputs.iter().map(|o| o.row_len()).collect();
        Ok((
            concat_columns(&outputs),
            Trace {
                trunk,
                branches: caches,
                branch_widths: widths,
            },
        ))
    }

    /// Accumulates parameter gradients for `dy` at the output of the pass
    /// recorded in `trace`; returns the gradient with respect to the input.
    pub fn backward(&mut self, trace: &Trace, dy: &Tensor) -> Result<Tensor> {
        let mut grad = if self.branches.is_empty() {
            dy.clone()
        } else {
            let parts = split_columns(dy, &trace.branch_widths)?;
            let mut total: Option<Tensor> = None;
            for ((branch, caches), part) in self.branches.iter_mut().zip(&trace.branches).zip(parts) {
                let mut g = part;
                for (layer, cache) in branch.iter_mut().zip(caches).rev() {
                    g = layer.backward(cache, &g)?;
                }
                match total.as_mut() {
                    Some(t) => t.add_assign(&g),
                    None => total = Some(g),
                }
            }
            total.expect("at least one branch")
        };
        for (layer, cache) in self.trunk.iter_mut().zip(&trace.trunk).rev() {
            grad = layer.backward(cache, &grad)?;
        }
        Ok(grad)
    }

    /// Inference-mode forward pass.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        check_input(&self.config, x)?;
        let mut h = x.clone();
        for layer in &self.trunk {
            h = layer.forward_eval(&h)?;
        }
        if self.branches.is_empty() {
            return Ok(h);
        }
        let outputs = self
            .branches
            .iter()
            .map(|branch| branch.iter().try_fold(h.clone(), |b, layer| layer.forward_eval(&b)))
            .collect::<Result<Vec<_>>>()?;
        Ok(concat_columns(&outputs))
    }

    /// [`Network::predict`] in chunks of at most `chunk` samples.
    pub fn predict_batched(&self, x: &Tensor, chunk: usize) -> Result<Tensor> {
        let n = x.batch();
        let chunk = chunk.max(1);
        let mut data = Vec::new();
        let mut out_shape = None;
        for start in (0..n).step_by(chunk) {
            let rows: Vec<usize> = (start..(start + chunk).min(n)).collect();
            let y = self.predict(&x.select(&rows))?;
            out_shape.get_or_insert_with(|| y.shape().to_vec());
            data.extend_from_slice(y.data());
        }
        let mut shape = out_shape.expect("non-empty input");
        shape[0] = n;
        Tensor::new(shape, data)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.trunk
            .iter_mut()
            .chain(self.branches.iter_mut().flatten())
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Persisted tensors in a fixed order, e.g. `trunk.0.weight`, `branch1.2.bias`.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.trunk.iter().enumerate() {
            for (name, t) in layer.tensors() {
                out.push((format!("trunk.{i}.{name}"), t));
            }
        }
        for (b, branch) in self.branches.iter().enumerate() {
            for (i, layer) in branch.iter().enumerate() {
                for (name, t) in layer.tensors() {
                    out.push((format!("branch{b}.{i}.{name}"), t));
                }
            }
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.trunk.iter_mut().enumerate() {
            for (name, t) in layer.tensors_mut() {
                out.push((format!("trunk.{i}.{name}"), t));
            }
        }
        for (b, branch) in self.branches.iter_mut().enumerate() {
            for (i, layer) in branch.iter_mut().enumerate() {
                for (name, t) in layer.tensors_mut() {
                    out.push((format!("branch{b}.{i}.{name}"), t));
                }
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors()
            .iter()
            .filter(|(n, _)| !n.ends_with("running_mean") && !n.ends_with("running_var"))
            .map(|(_, t)| t.len())
            .sum()
    }
}

fn concat_columns(parts: &[Tensor]) -> Tensor {
    let n = parts[0].batch();
    let width: usize = parts.iter().map(|p| p.row_len()).sum();
    let mut data = Vec::with_capacity(n * width);
    for i in 0..n {
        for p in parts {
            data.extend_from_slice(p.row(i));
        }
    }
    Tensor::new(vec![n, width], data).expect("consistent widths")
}

fn split_columns(t: &Tensor, widths: &[usize]) -> Result<Vec<Tensor>> {
    let total: usize = widths.iter().sum();
    if t.shape().len() != 2 || t.row_len() != total {
        return Err(shape_mismatch("branch gradient", format!("[N, {total}]"), t.shape()));
    }
    let n = t.batch();
    let mut parts: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(n * w)).collect();
    for i in 0..n {
        let row = t.row(i);
        let mut offset = 0;
        for (p, &w) in parts.iter_mut().zip(widths) {
            p.extend_from_slice(&row[offset..offset + w]);
            offset += w;
        }
    }
    parts
        .into_iter()
        .zip(widths)
        .map(|(d, &w)| Tensor::new(vec![n, w], d))
        .collect()
}
