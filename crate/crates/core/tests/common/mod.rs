#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikeattack::snn::{Conv2d, Dense};
use spikeattack::{BinaryTensor, InputCoding, LayerSpec, LifParams, NetworkModel, Tensor};

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn dense(rng: &mut ChaCha8Rng, i: usize, o: usize, scale: f64) -> Dense<f64> {
    Dense::new(i, o, uniform(rng, i * o, scale), uniform(rng, o, 0.1)).unwrap()
}

/// flatten → dense → lif → head, with weights uniform in ±`scale`.
pub fn dense_net(
    seed: u64,
    input: &[usize],
    hidden: usize,
    classes: usize,
    timesteps: usize,
    scale: f64,
) -> NetworkModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = input.iter().product();
    NetworkModel::new(
        input.to_vec(),
        vec![
            LayerSpec::Flatten,
            LayerSpec::Dense(dense(&mut rng, n, hidden, scale)),
            LayerSpec::Lif,
            LayerSpec::Head(dense(&mut rng, hidden, classes, 1.0)),
        ],
        LifParams::default(),
        timesteps,
        InputCoding::Direct,
    )
    .unwrap()
}

/// conv(3x3, pad 1) → lif → avgpool 2 → flatten → head on a (C, 4, 4) input.
pub fn conv_net(seed: u64, channels: usize, classes: usize, timesteps: usize) -> NetworkModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conv = Conv2d::zeros(channels, 4, 3, 1, 1);
    conv.weight = uniform(&mut rng, conv.weight.len(), 1.2);
    conv.bias = uniform(&mut rng, 4, 0.3);
    NetworkModel::new(
        vec![channels, 4, 4],
        vec![
            LayerSpec::Conv2d(conv),
            LayerSpec::Lif,
            LayerSpec::AvgPool2d { kernel: 2 },
            LayerSpec::Flatten,
            LayerSpec::Head(dense(&mut rng, 16, classes, 1.0)),
        ],
        LifParams::default(),
        timesteps,
        InputCoding::Direct,
    )
    .unwrap()
}

pub fn unit_input(seed: u64, shape: &[usize]) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(0.0..=1.0))
}

pub fn binary_input(seed: u64, shape: &[usize], density: f64) -> BinaryTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    BinaryTensor::new(shape.to_vec(), (0..n).map(|_| rng.random_bool(density) as u8).collect()).unwrap()
}
