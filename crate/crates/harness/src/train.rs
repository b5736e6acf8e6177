//! Minimal surrogate-gradient trainer: SGD with momentum on the time-mean
//! cross-entropy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spikeattack::snn::ParamGrads;
use spikeattack::stbp::{stbp_backward_with, BackwardOptions};
use spikeattack::{ce_loss, NetworkModel, Surrogate, Tensor};

use crate::data::{model_input, Dataset};
use crate::error::{Error, Result};
use crate::presets::{build, Arch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub surrogate: Surrogate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 12,
            lr: 0.05,
            momentum: 0.9,
            batch_size: 16,
            seed: 0,
            surrogate: Surrogate::Atan { alpha: 2.0 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: NetworkModel<f64>,
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub test_accuracy: f64,
}

fn sample_grads(
    m: &NetworkModel<f64>,
    data: &Dataset,
    i: usize,
    sg: &Surrogate,
    seed: u64,
) -> Result<(f64, Vec<Option<ParamGrads<f64>>>)> {
    let x = model_input(m, &data.inputs[i], seed)?;
    let rec = m.forward(&x)?;
    let lv = ce_loss(&rec.logits, data.labels[i])?;
    let opts = BackwardOptions {
        param_grads: true,
        ..BackwardOptions::default()
    };
    let back = stbp_backward_with(m, &rec, sg, &lv.grad, opts)?;
    Ok((lv.loss, back.param_grads))
}

/// Fraction of samples whose prediction equals the label.
pub fn accuracy(m: &NetworkModel<f64>, data: &Dataset, seed: u64) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let correct: Result<Vec<bool>> = (0..data.len())
        .into_par_iter()
        .map(|i| Ok(m.predict(&model_input(m, &data.inputs[i], seed ^ i as u64)?)? == data.labels[i]))
        .collect();
    Ok(correct?.into_iter().filter(|&c| c).count() as f64 / data.len() as f64)
}

/// Trains `model` in place. Gradients of a batch are computed in parallel
/// but summed in sample order, so results do not depend on the thread count.
pub fn train_model(
    mut model: NetworkModel<f64>,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<Trained> {
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr >= 0.0) {
        return Err(Error::Config(
            "epochs and batch size must be positive, lr non-negative".into(),
        ));
    }
    let sg = cfg.surrogate.validated()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity: Vec<Option<ParamGrads<f64>>> = model.layers().iter().map(ParamGrads::zeros_like).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let m = &model;
            let per_sample: Result<Vec<_>> = batch
                .par_iter()
                .map(|&i| sample_grads(m, train, i, &sg, cfg.seed ^ ((epoch * train.len() + i) as u64)))
                .collect();
            let mut sum: Vec<Option<ParamGrads<f64>>> = model.layers().iter().map(ParamGrads::zeros_like).collect();
            for (loss, grads) in per_sample? {
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                total += loss;
                for (acc, g) in sum.iter_mut().zip(&grads) {
                    if let (Some(acc), Some(g)) = (acc, g) {
                        acc.add_assign(g);
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for ((layer, w, b), (v, g)) in model.params_mut().zip(
                velocity
                    .iter_mut()
                    .zip(&sum)
                    .filter_map(|(v, g)| Some((v.as_mut()?, g.as_ref()?))),
            ) {
                debug_assert!(w.len() == v.weight.len(), "layer {layer}");
                for (p, (vi, gi)) in w.iter_mut().chain(b.iter_mut()).zip(
                    v.weight
                        .iter_mut()
                        .chain(v.bias.iter_mut())
                        .zip(g.weight.iter().chain(&g.bias)),
                ) {
                    *vi = cfg.momentum * *vi + gi * scale;
                    *p -= cfg.lr * *vi;
                }
            }
        }
        let mean = total / train.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epoch_loss.push(mean);
    }
    let test_accuracy = accuracy(&model, test, cfg.seed)?;
    Ok(Trained {
        model,
        epoch_loss,
        test_accuracy,
    })
}

/// Firing rate hidden LIF layers are calibrated to before training.
pub const CALIBRATION_RATE: f64 = 0.2;
const CALIBRATION_BATCH: usize = 64;

fn mean_rate(model: &NetworkModel<f64>, inputs: &[Tensor<f64>], lif: usize) -> Result<f64> {
    let rates = inputs
        .par_iter()
        .map(|x| {
            let s = &model.forward(x)?.spikes[lif];
            Ok(s.data().iter().sum::<f64>() / s.numel() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Shifts the bias of every layer that feeds a LIF layer, input side first,
/// until that LIF layer fires at about `target` over the first samples of
/// `data`. Random initializations otherwise often leave deep layers silent or
/// saturated, and such networks do not train.
pub fn calibrate_biases(model: &mut NetworkModel<f64>, data: &Dataset, target: f64) -> Result<()> {
    let inputs = data
        .inputs
        .iter()
        .take(CALIBRATION_BATCH)
        .map(|x| model_input(model, x, 0))
        .collect::<Result<Vec<_>>>()?;
    if inputs.is_empty() {
        return Ok(());
    }
    for (k, lif) in model.lif_layers().into_iter().enumerate() {
        let Some(feed) = lif.checked_sub(1) else { continue };
        let Some(base) = model.params_mut().find(|p| p.0 == feed).map(|(_, _, b)| b.to_vec()) else {
            continue;
        };
        let set = |m: &mut NetworkModel<f64>, shift: f64| {
            if let Some((_, _, b)) = m.params_mut().find(|p| p.0 == feed) {
                for (b, b0) in b.iter_mut().zip(&base) {
                    *b = b0 + shift;
                }
            }
        };
        // the rate is non-decreasing in a uniform bias shift
        let (mut lo, mut hi) = (-4.0, 4.0);
        for _ in 0..24 {
            let mid = 0.5 * (lo + hi);
            set(model, mid);
            if mean_rate(model, &inputs, k)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        set(model, 0.5 * (lo + hi));
    }
    Ok(())
}

/// Builds `arch` from `cfg.seed`, calibrates its hidden biases on `train`
/// and trains it.
pub fn train_minimal(arch: Arch, train: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
    let mut model = build(arch, cfg.seed);
    calibrate_biases(&mut model, train, CALIBRATION_RATE)?;
    train_model(model, train, test, cfg)
}
