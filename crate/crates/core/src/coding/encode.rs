use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn check_unit_range<S: Scalar>(img: &Tensor<S>) -> Result<()> {
    if let Some((i, v)) = img
        .data()
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v >= S::zero() && v <= S::one()))
    {
        return Err(Error::invalid(format!("pixel {i} = {v} outside [0, 1]")));
    }
    Ok(())
}

fn with_time(steps: usize, shape: &[usize]) -> Vec<usize> {
    let mut s = vec![steps];
    s.extend_from_slice(shape);
    s
}

/// Replicates `img` at each of `steps` timesteps.
pub fn encode_direct<S: Scalar>(img: &Tensor<S>, steps: usize) -> Result<Tensor<S>> {
    check_unit_range(img)?;
    if steps == 0 {
        return Err(Error::invalid("timesteps must be at least 1"));
    }
    let mut data = Vec::with_capacity(steps * img.numel());
    for _ in 0..steps {
        data.extend_from_slice(img.data());
    }
    Tensor::new(with_time(steps, img.shape()), data)
}

/// Bernoulli coding: element `(t, i)` is 1 iff `img[i] > r` with `r` drawn
/// uniformly from `[0, 1)`, so 1.0 always fires and 0.0 never does.
pub fn encode_poisson<S: Scalar>(img: &Tensor<S>, steps: usize, seed: u64) -> Result<Tensor<S>> {
    check_unit_range(img)?;
    if steps == 0 {
        return Err(Error::invalid("timesteps must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(steps * img.numel());
    for _ in 0..steps {
        for &v in img.data() {
            let r: f64 = rng.random();
            data.push(if v.as_f64() > r { S::one() } else { S::zero() });
        }
    }
    Tensor::new(with_time(steps, img.shape()), data)
}

/// Scales a non-negative frame tensor into `[0, 1]` by its maximum.
/// All-zero input is returned unchanged.
pub fn normalize_frames<S: Scalar>(frames: &Tensor<S>) -> Tensor<S> {
    let max = frames.max_abs();
    if max == S::zero() {
        return frames.clone();
    }
    frames.map(|v| v / max)
}
