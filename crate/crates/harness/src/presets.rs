//! Victim architectures used by the harness.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spikeattack::snn::{Conv2d, Dense};
use spikeattack::{InputCoding, LayerSpec, LifParams, NetworkModel};

use crate::data::{BAR_SENSOR, BLOB_SIZE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    /// 8×8 image → dense(64) → LIF → head(2), direct coding, T=4.
    DenseBlobs,
    /// 8×8 image → conv 1→4 → LIF → pool → conv 4→8 → LIF → pool → head(2),
    /// direct coding, T=4.
    ConvBlobs,
    /// 2×16×16 binary frames → conv 2→4 → LIF → pool → conv 4→8 → LIF →
    /// pool → head(4), T=10.
    ConvBars,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::DenseBlobs => "dense-blobs",
            Arch::ConvBlobs => "conv-blobs",
            Arch::ConvBars => "conv-bars",
        }
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-blobs" => Ok(Arch::DenseBlobs),
            "conv-blobs" => Ok(Arch::ConvBlobs),
            "conv-bars" => Ok(Arch::ConvBars),
            _ => Err(Error::Config(format!("unknown architecture '{s}'"))),
        }
    }
}

/// Uniform in ±`gain·√(3 / fan_in)`.
fn init(rng: &mut ChaCha8Rng, n: usize, fan_in: usize, gain: f64) -> Vec<f64> {
    let a = gain * (3.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-a..a)).collect()
}

fn conv(rng: &mut ChaCha8Rng, cin: usize, cout: usize, gain: f64) -> LayerSpec<f64> {
    let mut c = Conv2d::zeros(cin, cout, 3, 1, 1);
    c.weight = init(rng, c.weight.len(), cin * 9, gain);
    LayerSpec::Conv2d(c)
}

fn dense(rng: &mut ChaCha8Rng, i: usize, o: usize, gain: f64) -> Dense<f64> {
    Dense::new(i, o, init(rng, i * o, i, gain), vec![0.0; o]).expect("consistent sizes")
}

/// Freshly initialized model for `arch`.
pub fn build(arch: Arch, seed: u64) -> NetworkModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input, layers, steps, coding) = match arch {
        Arch::DenseBlobs => (
            vec![1, BLOB_SIZE, BLOB_SIZE],
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense(dense(&mut rng, 64, 64, 2.0)),
                LayerSpec::Lif,
                LayerSpec::Head(dense(&mut rng, 64, 2, 1.0)),
            ],
            4,
            InputCoding::Direct,
        ),
        Arch::ConvBlobs => (
            vec![1, BLOB_SIZE, BLOB_SIZE],
            vec![
                conv(&mut rng, 1, 4, 2.0),
                LayerSpec::Lif,
                LayerSpec::AvgPool2d { kernel: 2 },
                conv(&mut rng, 4, 8, 2.0),
                LayerSpec::Lif,
                LayerSpec::AvgPool2d { kernel: 2 },
                LayerSpec::Flatten,
                LayerSpec::Head(dense(&mut rng, 32, 2, 1.0)),
            ],
            4,
            InputCoding::Direct,
        ),
        Arch::ConvBars => {
            let s = BAR_SENSOR as usize;
            (
                vec![2, s, s],
                vec![
                    conv(&mut rng, 2, 4, 2.0),
                    LayerSpec::Lif,
                    LayerSpec::AvgPool2d { kernel: 2 },
                    conv(&mut rng, 4, 8, 2.0),
                    LayerSpec::Lif,
                    LayerSpec::AvgPool2d { kernel: 2 },
                    LayerSpec::Flatten,
                    LayerSpec::Head(dense(&mut rng, 8 * (s / 4) * (s / 4), 4, 1.0)),
                ],
                10,
                InputCoding::BinaryFrames,
            )
        }
    };
    NetworkModel::new(input, layers, LifParams::default(), steps, coding).expect("presets are valid")
}

/// Random dense victim on `(T=2, 1, 3, 3)` binary inputs (18 pixels).
pub fn tiny(seed: u64) -> NetworkModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hidden = dense(&mut rng, 9, 8, 2.5);
    hidden.bias = (0..8).map(|_| rng.random_range(0.0..0.5)).collect();
    NetworkModel::new(
        vec![1, 3, 3],
        vec![
            LayerSpec::Flatten,
            LayerSpec::Dense(hidden),
            LayerSpec::Lif,
            LayerSpec::Head(dense(&mut rng, 8, 2, 2.0)),
        ],
        LifParams::default(),
        2,
        InputCoding::BinaryFrames,
    )
    .expect("valid tiny model")
}
