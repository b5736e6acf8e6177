//! Synthetic desk-scale datasets and their on-disk layout.
//!
//! A dataset directory holds `inputs.snnt`, the stacked samples `(N, ...)`,
//! and `labels.snnt`, an `(N,)` vector of class indices. Static datasets
//! store images; event datasets store binarized frames `(T, 2, H, W)`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spikeattack::coding::{
    aggregate_events, binarize_frames, encode_direct, encode_poisson, normalize_frames, Event, EventStream, Slicing,
};
use spikeattack::tensor::{read_tensor, write_tensor, AnyTensor};
use spikeattack::{BinaryTensor, InputCoding, NetworkModel, Tensor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Tensor<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let binary = self.inputs.iter().all(|x| BinaryTensor::from_tensor(x).is_ok());
        let stacked = Tensor::stack(&self.inputs)?;
        let inputs = if binary {
            AnyTensor::Binary(BinaryTensor::from_tensor(&stacked)?)
        } else {
            AnyTensor::F32(stacked.cast())
        };
        write_tensor(dir.join("inputs.snnt"), &inputs)?;
        let labels = Tensor::vector(self.labels.iter().map(|&l| l as f32).collect());
        write_tensor(dir.join("labels.snnt"), &AnyTensor::F32(labels))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let stacked: Tensor<f64> = read_tensor(dir.join("inputs.snnt"))?.into_float();
        let labels: Tensor<f64> = read_tensor(dir.join("labels.snnt"))?.into_float();
        let n = labels.numel();
        if stacked.shape().first() != Some(&n) {
            return Err(Error::Config(format!(
                "{} samples but {n} labels in {}",
                stacked.shape().first().unwrap_or(&0),
                dir.display()
            )));
        }
        let labels: Vec<usize> = labels.data().iter().map(|&l| l as usize).collect();
        let inputs = (0..n).map(|i| stacked.slice(i)).collect();
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        Ok(Self {
            inputs,
            labels,
            num_classes,
        })
    }

    /// Splits off the last `test` samples.
    pub fn split(mut self, test: usize) -> (Dataset, Dataset) {
        let at = self.len().saturating_sub(test);
        let t_in = self.inputs.split_off(at);
        let t_lab = self.labels.split_off(at);
        let k = self.num_classes;
        (
            self,
            Dataset {
                inputs: t_in,
                labels: t_lab,
                num_classes: k,
            },
        )
    }
}

/// Network input for a stored sample under the model's coding scheme.
/// Poisson coding draws from `seed`.
pub fn model_input(m: &NetworkModel<f64>, sample: &Tensor<f64>, seed: u64) -> Result<Tensor<f64>> {
    let steps = m.timesteps();
    Ok(match m.coding() {
        InputCoding::Direct => encode_direct(sample, steps)?,
        InputCoding::Poisson => encode_poisson(sample, steps, seed)?,
        InputCoding::IntegerFrames => normalize_frames(sample),
        InputCoding::BinaryFrames => sample.clone(),
    })
}

pub const BLOB_SIZE: usize = 8;

/// Two-class 8×8 low-contrast images: a faint Gaussian bump near one of two
/// opposite corners on a mid-grey background with uniform pixel noise.
/// Class `i % 2` for sample `i`.
pub fn blobs(count: usize, contrast: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label = i % 2;
        let base = if label == 0 { 2.0 } else { 5.0 };
        let (cy, cx) = (base + rng.random_range(-0.5..0.5), base + rng.random_range(-0.5..0.5));
        let mut img = Tensor::zeros(&[1, BLOB_SIZE, BLOB_SIZE]);
        for (p, v) in img.data_mut().iter_mut().enumerate() {
            let (y, x) = ((p / BLOB_SIZE) as f64, (p % BLOB_SIZE) as f64);
            let bump = (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * 1.5 * 1.5)).exp();
            *v = (0.5 + contrast * bump + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0);
        }
        inputs.push(img);
        labels.push(label);
    }
    Dataset {
        inputs,
        labels,
        num_classes: 2,
    }
}

pub const BAR_SENSOR: u16 = 16;

/// Direction of a moving bar; the class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Right,
    Left,
    Down,
    Up,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Right, Direction::Left, Direction::Down, Direction::Up];
}

/// Events of one bar sweeping across a 16×16 sensor: ON events on the
/// leading edge, OFF events on the trailing edge, plus background noise.
pub fn moving_bar(dir: Direction, rng: &mut impl Rng) -> EventStream {
    let n = BAR_SENSOR as usize;
    let extent_lo = rng.random_range(0..n / 4);
    let extent_hi = rng.random_range(3 * n / 4..n);
    let start = rng.random_range(0..3) as i64;
    let step_us = rng.random_range(800..1200u32);
    let mut events = Vec::new();
    for step in 0..n as i64 {
        let lead = start + step;
        let trail = lead - 2;
        let t0 = step as u32 * step_us;
        for (pos, p) in [(lead, 1u8), (trail, 0u8)] {
            if !(0..n as i64).contains(&pos) {
                continue;
            }
            let along = match dir {
                Direction::Right | Direction::Down => pos as u16,
                Direction::Left | Direction::Up => (n as i64 - 1 - pos) as u16,
            };
            for across in extent_lo as u16..extent_hi as u16 {
                if rng.random_bool(0.85) {
                    let (x, y) = match dir {
                        Direction::Right | Direction::Left => (along, across),
                        Direction::Down | Direction::Up => (across, along),
                    };
                    events.push(Event {
                        t: t0 + rng.random_range(0..step_us / 2),
                        x,
                        y,
                        p,
                    });
                }
            }
        }
    }
    let duration = n as u32 * step_us;
    for _ in 0..rng.random_range(10..30) {
        events.push(Event {
            t: rng.random_range(0..duration),
            x: rng.random_range(0..BAR_SENSOR),
            y: rng.random_range(0..BAR_SENSOR),
            p: rng.random_range(0..2),
        });
    }
    events.sort_by_key(|e| e.t);
    EventStream::new(BAR_SENSOR, BAR_SENSOR, events).expect("generated events are valid")
}

/// Four-class moving-bar event streams, class `i % 4` for sample `i`.
pub fn bar_streams(count: usize, seed: u64) -> Vec<(EventStream, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| (moving_bar(Direction::ALL[i % 4], &mut rng), i % 4))
        .collect()
}

/// Moving bars aggregated into `steps` binarized frames `(steps, 2, 16, 16)`.
pub fn bars(count: usize, steps: usize, seed: u64) -> Result<Dataset> {
    let mut inputs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for (stream, label) in bar_streams(count, seed) {
        let frames = aggregate_events::<f64>(&stream, steps, Slicing::EqualDuration)?;
        inputs.push(binarize_frames(&frames).to_tensor());
        labels.push(label);
    }
    Ok(Dataset {
        inputs,
        labels,
        num_classes: 4,
    })
}
