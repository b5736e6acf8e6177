//! Attack evaluation protocol: pick correctly classified samples, attack
//! each, and aggregate success rate and ℓ0 statistics over the successes.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spikeattack::attack::{fgsm, pgd, AttackConfig, AttackRecord, Method};
use spikeattack::sda::{sda_attack, SdaConfig};
use spikeattack::{BinaryTensor, NetworkModel};

use crate::data::{model_input, Dataset};
use crate::error::Result;

/// Default generation-iteration cap for sparse attacks.
pub const ITERATION_CAP: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum AttackSpec {
    Fgsm(AttackConfig),
    Pgd(AttackConfig),
    Sda(SdaConfig),
}

impl AttackSpec {
    pub fn method(&self) -> Method {
        match self {
            AttackSpec::Fgsm(_) => Method::Fgsm,
            AttackSpec::Pgd(_) => Method::Pgd,
            AttackSpec::Sda(_) => Method::Sda,
        }
    }
}

/// One attacked sample: its record, or the error that stopped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleOutcome {
    Attacked(AttackRecord),
    Error { sample: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAsr {
    pub l0_below: usize,
    pub asr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Samples attacked (all correctly classified before the attack).
    pub attacked: usize,
    pub successes: usize,
    /// Percent of attacked samples.
    pub asr: f64,
    /// ℓ0 statistics over successful attacks; `None` without successes.
    pub mean_l0: Option<f64>,
    pub median_l0: Option<f64>,
    /// Mean iterations over attacked samples.
    pub mean_iterations: Option<f64>,
    /// Percent of attacked samples broken with ℓ0 strictly below a bound.
    pub bounded: Vec<ThresholdAsr>,
    /// Samples whose attack raised an error; excluded from the figures above.
    pub errors: usize,
}

/// Median of a non-empty slice; the mean of the middle pair for even sizes.
fn median(values: &mut [usize]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid] as f64
    } else {
        (values[mid - 1] + values[mid]) as f64 / 2.0
    })
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Report over per-sample outcomes. A success that took more than `cap`
/// iterations counts as a failure.
pub fn aggregate_report(outcomes: &[SampleOutcome], cap: usize, thresholds: &[usize]) -> EvalReport {
    let records: Vec<&AttackRecord> = outcomes
        .iter()
        .filter_map(|o| match o {
            SampleOutcome::Attacked(r) => Some(r),
            SampleOutcome::Error { .. } => None,
        })
        .collect();
    let attacked = records.len();
    let mut l0: Vec<usize> = records
        .iter()
        .filter(|r| r.success && r.iterations <= cap)
        .map(|r| r.l0)
        .collect();
    let successes = l0.len();
    let bounded = thresholds
        .iter()
        .map(|&t| ThresholdAsr {
            l0_below: t,
            asr: percent(l0.iter().filter(|&&v| v < t).count(), attacked),
        })
        .collect();
    EvalReport {
        attacked,
        successes,
        asr: percent(successes, attacked),
        mean_l0: (successes > 0).then(|| l0.iter().sum::<usize>() as f64 / successes as f64),
        median_l0: median(&mut l0),
        mean_iterations: (attacked > 0)
            .then(|| records.iter().map(|r| r.iterations).sum::<usize>() as f64 / attacked as f64),
        bounded,
        errors: outcomes.len() - attacked,
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        writeln!(f, "{:<22} {}", "attacked", self.attacked)?;
        writeln!(f, "{:<22} {}", "successes", self.successes)?;
        writeln!(f, "{:<22} {:.2}", "ASR (%)", self.asr)?;
        writeln!(f, "{:<22} {}", "mean l0", opt(self.mean_l0))?;
        writeln!(f, "{:<22} {}", "median l0", opt(self.median_l0))?;
        writeln!(f, "{:<22} {}", "mean iterations", opt(self.mean_iterations))?;
        for b in &self.bounded {
            writeln!(f, "{:<22} {:.2}", format!("ASR (%) l0 < {}", b.l0_below), b.asr)?;
        }
        write!(f, "{:<22} {}", "errors", self.errors)
    }
}

/// Share of a `(T, P, H, W)`-style volume that an ℓ0 perturbation touches,
/// in percent.
pub fn pixel_fraction_percent(l0: usize, shape: &[usize]) -> f64 {
    100.0 * l0 as f64 / shape.iter().product::<usize>() as f64
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub outcomes: Vec<SampleOutcome>,
    pub report: EvalReport,
    /// Wall-clock seconds per attacked sample. Kept out of the report so
    /// reports stay reproducible.
    pub seconds_per_sample: f64,
    /// Correctly classified samples available in the dataset.
    pub correct_available: usize,
}

fn attack_one(m: &NetworkModel<f64>, data: &Dataset, i: usize, spec: &AttackSpec, seed: u64) -> Result<AttackRecord> {
    let x = model_input(m, &data.inputs[i], seed)?;
    let y = data.labels[i];
    Ok(match spec {
        AttackSpec::Fgsm(cfg) => fgsm(m, &x, y, cfg)?.record(i),
        AttackSpec::Pgd(cfg) => pgd(m, &x, y, cfg)?.record(i),
        AttackSpec::Sda(cfg) => sda_attack(m, &BinaryTensor::from_tensor(&x)?, y, cfg)?.result.record(i),
    })
}

/// Attacks up to `budget` correctly classified samples, chosen in a seeded
/// random order, and aggregates the report. Per-sample errors are recorded
/// rather than aborting the run.
pub fn evaluate_attack(
    m: &NetworkModel<f64>,
    data: &Dataset,
    spec: &AttackSpec,
    budget: usize,
    thresholds: &[usize],
    seed: u64,
) -> Result<Evaluation> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let input_seed = |i: usize| seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let correct: Vec<bool> = order
        .par_iter()
        .map(|&i| Ok(m.predict(&model_input(m, &data.inputs[i], input_seed(i))?)? == data.labels[i]))
        .collect::<Result<_>>()?;
    let chosen: Vec<usize> = order
        .iter()
        .zip(&correct)
        .filter(|(_, &c)| c)
        .map(|(&i, _)| i)
        .collect();
    let correct_available = chosen.len();
    let chosen = &chosen[..budget.min(chosen.len())];

    let start = Instant::now();
    let outcomes: Vec<SampleOutcome> = chosen
        .par_iter()
        .map(|&i| match attack_one(m, data, i, spec, input_seed(i)) {
            Ok(r) => SampleOutcome::Attacked(r),
            Err(e) => SampleOutcome::Error {
                sample: i,
                message: e.to_string(),
            },
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let cap = match spec {
        AttackSpec::Sda(cfg) => cfg.max_iters,
        _ => usize::MAX,
    };
    Ok(Evaluation {
        report: aggregate_report(&outcomes, cap, thresholds),
        seconds_per_sample: elapsed / chosen.len().max(1) as f64,
        outcomes,
        correct_available,
    })
}
