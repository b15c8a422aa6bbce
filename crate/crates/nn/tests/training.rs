use qpt_nn::{
    evaluate_mse, train, AutoencoderShape, Dataset, FeedForwardShape, Network, NetworkConfig, NnError, Tensor,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-channel 4×4 images shaped like depolarizing-channel process matrices:
/// diagonal (1−p, p/3, p/3, p/3) in the first channel, zero second channel.
fn diagonal_images(n: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * 32);
    for _ in 0..n {
        let p: f64 = rng.random();
        let mut img = [0.0; 32];
        img[0] = 1.0 - p;
        for i in 1..4 {
            img[i * 5] = p / 3.0;
        }
        data.extend_from_slice(&img);
    }
    Tensor::new(vec![n, 2, 4, 4], data).unwrap()
}

fn identity_split(x: &Tensor, train_fraction: f64) -> (Dataset, Dataset) {
    let n = x.batch();
    let k = (n as f64 * train_fraction) as usize;
    let a: Vec<usize> = (0..k).collect();
    let b: Vec<usize> = (k..n).collect();
    (
        Dataset::new(x.select(&a), x.select(&a)).unwrap(),
        Dataset::new(x.select(&b), x.select(&b)).unwrap(),
    )
}

fn autoencoder(batch_norm: bool) -> NetworkConfig {
    NetworkConfig::autoencoder(&AutoencoderShape {
        side: 4,
        channels: 2,
        kernel: 2,
        latent: 40,
        widths: vec![16, 32, 64],
        batch_norm,
    })
    .unwrap()
}

#[test]
fn identity_task_reaches_tight_loss_without_batch_norm() {
    let (tr, va) = identity_split(&diagonal_images(1500, 1), 0.8);
    let mut net = Network::new(autoencoder(false), 3).unwrap();
    let config = TrainConfig {
        max_epochs: 50,
        patience: 50,
        ..TrainConfig::default()
    };
    let report = train(&mut net, &tr, &va, &config, 5).unwrap();
    assert!(report.final_val_mse < 1e-6, "{report:?}");
    assert_eq!(evaluate_mse(&net, &va).unwrap(), report.final_val_mse);
}

#[test]
fn identity_task_with_batch_norm_converges() {
    // Batch statistics make the output depend on the other samples in the
    // batch, so the attainable loss is bounded below by that noise.
    let (tr, va) = identity_split(&diagonal_images(1000, 2), 0.8);
    let mut net = Network::new(autoencoder(true), 4).unwrap();
    let report = train(&mut net, &tr, &va, &TrainConfig::default(), 6).unwrap();
    assert!(report.final_val_mse < 1e-3, "{report:?}");
    assert!(report.val_loss.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert_eq!(report.train_loss.len(), report.epochs);
    assert_eq!(report.val_loss.len(), report.epochs);
}

#[test]
fn tiny_dataset_loss_decreases_monotonically() {
    let x = diagonal_images(10, 7);
    let (tr, va) = identity_split(&x, 0.8);
    assert_eq!(tr.len(), 8);
    let mut net = Network::new(autoencoder(true), 8).unwrap();
    let mut config = TrainConfig {
        batch_size: 8,
        max_epochs: 5,
        patience: 5,
        ..TrainConfig::default()
    };
    config.adam.learning_rate = 1e-4;
    let report = train(&mut net, &tr, &va, &config, 9).unwrap();
    assert_eq!(report.epochs, 5);
    for w in report.train_loss.windows(2) {
        assert!(w[1] < w[0], "{:?}", report.train_loss);
    }
}

#[test]
fn training_is_bitwise_deterministic() {
    let x = diagonal_images(200, 10);
    let (tr, va) = identity_split(&x, 0.8);
    let config = TrainConfig {
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let run = || {
        let mut net = Network::new(autoencoder(true), 11).unwrap();
        let report = train(&mut net, &tr, &va, &config, 12).unwrap();
        (report, qpt_nn::model_to_bytes(&net))
    };
    let (r1, m1) = run();
    let (r2, m2) = run();
    assert_eq!(r1, r2);
    assert_eq!(m1, m2);
    let mut net = Network::new(autoencoder(true), 11).unwrap();
    let other = train(&mut net, &tr, &va, &config, 13).unwrap();
    assert_ne!(other.train_loss, r1.train_loss);
}

#[test]
fn early_stopping_restores_best_weights() {
    let x = diagonal_images(100, 14);
    let (tr, va) = identity_split(&x, 0.8);
    let mut config = TrainConfig {
        max_epochs: 40,
        patience: 2,
        ..TrainConfig::default()
    };
    // A large step makes the validation loss wander so the patience rule fires.
    config.adam.learning_rate = 0.05;
    let mut net = Network::new(autoencoder(true), 15).unwrap();
    let report = train(&mut net, &tr, &va, &config, 16).unwrap();
    let best = report.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(report.final_val_mse, best);
    assert_eq!(report.val_loss[report.best_epoch - 1], best);
    assert_eq!(evaluate_mse(&net, &va).unwrap(), best);
    if report.stopped_early {
        assert_eq!(report.epochs - report.best_epoch, 2);
    }
}

#[test]
fn divergence_is_reported_with_epoch() {
    let config = NetworkConfig::feed_forward(&FeedForwardShape {
        inputs: 4,
        width_factor: 2,
        branches: 1,
    })
    .unwrap();
    let x = Tensor::new(vec![8, 4], (0..32).map(|i| i as f64).collect()).unwrap();
    let y = Tensor::filled(&[8, 1], 1e200);
    let data = Dataset::new(x, y).unwrap();
    let mut net = Network::new(config, 0).unwrap();
    let err = train(&mut net, &data, &data, &TrainConfig::default(), 0).unwrap_err();
    assert!(matches!(err, NnError::Diverged { epoch: 1, .. }), "{err}");
}

#[test]
fn rejects_mismatched_targets() {
    let x = diagonal_images(10, 17);
    let bad = Dataset::new(x.clone(), Tensor::zeros(&[10, 3])).unwrap();
    let mut net = Network::new(autoencoder(true), 0).unwrap();
    assert!(train(&mut net, &bad, &bad, &TrainConfig::default(), 0).is_err());
    assert!(Dataset::new(x, Tensor::zeros(&[9, 2, 4, 4])).is_err());
}
