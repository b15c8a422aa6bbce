//! Central-difference gradient checks for single layers and whole networks.
//! Shared with the acceptance suite.

#![allow(dead_code)]

use qpt_nn::{
    AutoencoderShape, FeedForwardShape, Layer, LayerSpec, Network, NetworkConfig, Tensor,
};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const STEP: f64 = 1e-5;

/// Relative error with a floor on the denominator, so that gradients that
/// vanish analytically are compared absolutely at the floor's scale.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = StandardNormal.sample(rng);
    }
    t
}

/// Every (layer spec, per-sample input shape) pair that occurs in the
/// autoencoder and feed-forward architectures used by the estimators.
pub fn architecture_layers() -> Vec<(LayerSpec, Vec<usize>)> {
    let mut configs = Vec::new();
    for (side, kernel, latent) in [(4, 2, 40), (16, 4, 30)] {
        configs.push(
            NetworkConfig::autoencoder(&AutoencoderShape {
                side,
                channels: 2,
                kernel,
                latent,
                widths: vec![16, 32, 64],
                batch_norm: true,
            })
            .unwrap(),
        );
    }
    for (inputs, g, branches) in [(4, 2, 1), (32, 2, 2), (512, 1, 1)] {
        configs.push(
            NetworkConfig::feed_forward(&FeedForwardShape {
                inputs,
                width_factor: g,
                branches,
            })
            .unwrap(),
        );
    }
    let mut out = Vec::new();
    for config in configs {
        let mut shape = config.input_shape.clone();
        for spec in &config.trunk {
            out.push((spec.clone(), shape.clone()));
            shape = spec.output_shape(&shape).unwrap();
        }
        for branch in &config.branches {
            let mut s = shape.clone();
            for spec in branch {
                out.push((spec.clone(), s.clone()));
                s = spec.output_shape(&s).unwrap();
            }
        }
    }
    out
}

pub fn kind(spec: &LayerSpec) -> &'static str {
    match spec {
        LayerSpec::Conv2d { .. } => "conv2d",
        LayerSpec::ConvTranspose2d { .. } => "conv_transpose2d",
        LayerSpec::BatchNorm { .. } => "batch_norm",
        LayerSpec::Relu => "relu",
        LayerSpec::Dense { .. } => "dense",
        LayerSpec::Flatten => "flatten",
        LayerSpec::Reshape { .. } => "reshape",
    }
}

fn with_batch(batch: usize, sample: &[usize]) -> Vec<usize> {
    let mut s = vec![batch];
    s.extend_from_slice(sample);
    s
}

fn projected(layer: &mut Layer, x: &Tensor, r: &Tensor) -> f64 {
    layer.forward_train(x).unwrap().0.dot(r)
}

/// Checks `coords` randomly chosen input entries and up to `coords` entries of
/// every parameter tensor of a freshly initialized layer against central
/// differences of `⟨r, layer(x)⟩`. Returns the worst relative error.
pub fn check_layer(spec: &LayerSpec, sample_shape: &[usize], batch: usize, coords: usize, rng: &mut impl Rng) -> f64 {
    let mut layer = Layer::from_spec(spec, rng).unwrap();
    // Non-trivial scale and shift so batch-norm parameters are exercised.
    if let Layer::BatchNorm(bn) = &mut layer {
        for v in bn.gamma.value.data_mut().iter_mut().chain(bn.beta.value.data_mut()) {
            *v = rng.random_range(0.5..1.5);
        }
    }
    let mut x = random_tensor(&with_batch(batch, sample_shape), rng);
    if matches!(spec, LayerSpec::Relu) {
        // Keep away from the kink.
        for v in x.data_mut() {
            if v.abs() < 1e-2 {
                *v += 0.1f64.copysign(*v);
            }
        }
    }
    let out_shape = spec.output_shape(sample_shape).unwrap();
    let r = random_tensor(&with_batch(batch, &out_shape), rng);

    let (_, cache) = layer.forward_train(&x).unwrap();
    for p in layer.params_mut() {
        p.zero_grad();
    }
    let dx = layer.backward(&cache, &r).unwrap();
    let grads: Vec<Tensor> = layer.params_mut().iter().map(|p| p.grad.clone()).collect();

    let mut worst = 0.0f64;
    for i in sample(rng, x.len(), coords.min(x.len())) {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + STEP;
        let up = projected(&mut layer, &x, &r);
        x.data_mut()[i] = orig - STEP;
        let down = projected(&mut layer, &x, &r);
        x.data_mut()[i] = orig;
        worst = worst.max(rel_err(dx.data()[i], (up - down) / (2.0 * STEP)));
    }
    for (p_idx, grad) in grads.iter().enumerate() {
        for i in sample(rng, grad.len(), coords.min(grad.len())) {
            let orig = layer.params_mut()[p_idx].value.data()[i];
            layer.params_mut()[p_idx].value.data_mut()[i] = orig + STEP;
            let up = projected(&mut layer, &x, &r);
            layer.params_mut()[p_idx].value.data_mut()[i] = orig - STEP;
            let down = projected(&mut layer, &x, &r);
            layer.params_mut()[p_idx].value.data_mut()[i] = orig;
            worst = worst.max(rel_err(grad.data()[i], (up - down) / (2.0 * STEP)));
        }
    }
    worst
}

/// End-to-end check of [`Network::backward`] on a projected output.
pub fn check_network(net: &mut Network, batch: usize, coords: usize, rng: &mut impl Rng) -> f64 {
    let x = random_tensor(&with_batch(batch, &net.config().input_shape.clone()), rng);
    let r = random_tensor(&with_batch(batch, &net.config().output_shape()), rng);
    net.zero_grad();
    let (_, trace) = net.forward_train(&x).unwrap();
    let dx = net.backward(&trace, &r).unwrap();
    let grads: Vec<Tensor> = net.params_mut().iter().map(|p| p.grad.clone()).collect();
    let eval = |net: &mut Network, x: &Tensor| net.forward_train(x).unwrap().0.dot(&r);

    let mut worst = 0.0f64;
    let mut x = x;
    for i in sample(rng, x.len(), coords.min(x.len())) {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + STEP;
        let up = eval(net, &x);
        x.data_mut()[i] = orig - STEP;
        let down = eval(net, &x);
        x.data_mut()[i] = orig;
        worst = worst.max(rel_err(dx.data()[i], (up - down) / (2.0 * STEP)));
    }
    for (p_idx, grad) in grads.iter().enumerate() {
        for i in sample(rng, grad.len(), 2.min(grad.len())) {
            let orig = net.params_mut()[p_idx].value.data()[i];
            net.params_mut()[p_idx].value.data_mut()[i] = orig + STEP;
            let up = eval(net, &x);
            net.params_mut()[p_idx].value.data_mut()[i] = orig - STEP;
            let down = eval(net, &x);
            net.params_mut()[p_idx].value.data_mut()[i] = orig;
            worst = worst.max(rel_err(grad.data()[i], (up - down) / (2.0 * STEP)));
        }
    }
    worst
}
