use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::FailureReason;
use crate::error::{Error, Result};
use crate::loss::{cw_loss, LossKind};
use crate::scalar::Scalar;
use crate::snn::NetworkModel;
use crate::stbp::{input_gradient, Surrogate};
use crate::tensor::{argtopk, BinaryTensor, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdaConfig {
    /// Candidate-count increment per iteration.
    pub k_init: usize,
    /// Generation iteration cap.
    pub max_iters: usize,
    pub surrogate: Surrogate,
    /// Run the reduction stage after a successful generation.
    pub reduce: bool,
    /// Evaluate each finite-difference batch on the rayon pool.
    pub parallel: bool,
}

impl Default for SdaConfig {
    fn default() -> Self {
        Self {
            k_init: 10,
            max_iters: 500,
            surrogate: Surrogate::default(),
            reduce: true,
            parallel: true,
        }
    }
}

impl SdaConfig {
    fn check(&self) -> Result<()> {
        if self.k_init == 0 || self.max_iters == 0 {
            return Err(Error::invalid("k_init and max_iters must be at least 1"));
        }
        self.surrogate.validated()?;
        Ok(())
    }
}

/// Measured effect of flipping one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdRecord<S> {
    pub index: usize,
    /// `1 − 2·x_i`: +1 for a 0→1 flip, −1 for 1→0.
    pub delta: i8,
    /// `[L(x + Δ·e_i) − L(x)] / Δ`.
    pub fd: S,
    /// Generation iteration in which the flip was measured.
    pub iteration: usize,
}

/// Set of flipped pixels, in admission order with their recorded FDs.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMask<S> {
    bits: BinaryTensor,
    records: Vec<FdRecord<S>>,
}

impl<S: Scalar> PerturbationMask<S> {
    pub fn empty(shape: &[usize]) -> Self {
        Self {
            bits: BinaryTensor::zeros(shape),
            records: Vec::new(),
        }
    }

    pub fn bits(&self) -> &BinaryTensor {
        &self.bits
    }

    pub fn records(&self) -> &[FdRecord<S>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.bits.get(index) == 1
    }

    /// Adds a flip. Masks only grow; admitting an index twice is an error.
    pub fn admit(&mut self, rec: FdRecord<S>) -> Result<()> {
        if rec.index >= self.bits.numel() || self.contains(rec.index) {
            return Err(Error::invalid(format!("index {} cannot be admitted", rec.index)));
        }
        self.bits.set(rec.index, true);
        self.records.push(rec);
        Ok(())
    }

    /// `x xor mask`.
    pub fn apply(&self, x: &BinaryTensor) -> Result<BinaryTensor> {
        x.xor(&self.bits)
    }
}

/// Keeps `g_i` where flipping pixel `i` moves along the loss gradient's
/// descent direction (`(1 − 2x_i)·g_i ≤ 0`) and `i` is not yet masked.
pub fn contributing_gradients<S: Scalar>(g: &Tensor<S>, x: &BinaryTensor, mask: &BinaryTensor) -> Result<Tensor<S>> {
    if g.shape() != x.shape() || g.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            expected: x.shape().to_vec(),
            got: if g.shape() != x.shape() {
                g.shape().to_vec()
            } else {
                mask.shape().to_vec()
            },
        });
    }
    Ok(Tensor::from_fn(g.shape(), |i| {
        let gi = g.data()[i];
        let delta = if x.get(i) == 0 { S::one() } else { -S::one() };
        if mask.get(i) == 0 && delta * gi <= S::zero() {
            gi
        } else {
            S::zero()
        }
    }))
}

/// The `(n + 1)·k_init` entries of largest magnitude, largest first, with
/// zero entries dropped.
pub fn topk_candidates<S: Scalar>(gc: &Tensor<S>, n: usize, k_init: usize) -> Vec<usize> {
    let mags: Vec<S> = gc.data().iter().map(|v| v.abs()).collect();
    let k = n.saturating_add(1).saturating_mul(k_init);
    let mut idx = argtopk(&mags, k);
    idx.retain(|&i| mags[i] > S::zero());
    idx
}

/// FD records for a batch plus the forward passes spent on it.
#[derive(Debug, Clone, PartialEq)]
pub struct FdBatch<S> {
    pub records: Vec<FdRecord<S>>,
    pub baseline: S,
    pub forwards: usize,
}

fn margin<S: Scalar>(m: &NetworkModel<S>, x: &Tensor<S>, y: usize) -> Result<S> {
    Ok(cw_loss(&m.logits(x)?, y)?.loss)
}

fn fd_against<S: Scalar>(
    m: &NetworkModel<S>,
    x: &BinaryTensor,
    y: usize,
    idxs: &[usize],
    baseline: S,
    iteration: usize,
    parallel: bool,
) -> Result<Vec<FdRecord<S>>> {
    let base = x.to_tensor::<S>();
    if let Some(&bad) = idxs.iter().find(|&&i| i >= base.numel()) {
        return Err(Error::invalid(format!("flip index {bad} out of bounds")));
    }
    let one = |&i: &usize| -> Result<FdRecord<S>> {
        let mut probe = base.clone();
        let delta: i8 = if x.get(i) == 0 { 1 } else { -1 };
        probe.data_mut()[i] += S::lit(delta as f64);
        let change = margin(m, &probe, y)? - baseline;
        Ok(FdRecord {
            index: i,
            delta,
            fd: if delta > 0 { change } else { -change },
            iteration,
        })
    };
    if parallel {
        idxs.par_iter().map(one).collect()
    } else {
        idxs.iter().map(one).collect()
    }
}

/// Exact one-pixel finite differences of the margin loss at `x`: one
/// baseline forward plus one forward per index, in the order given.
pub fn finite_difference_batch<S: Scalar>(
    m: &NetworkModel<S>,
    x: &BinaryTensor,
    y: usize,
    idxs: &[usize],
    iteration: usize,
) -> Result<FdBatch<S>> {
    let baseline = margin(m, &x.to_tensor(), y)?;
    let records = fd_against(m, x, y, idxs, baseline, iteration, true)?;
    Ok(FdBatch {
        records,
        baseline,
        forwards: idxs.len() + 1,
    })
}

/// Records whose measured loss change opposes the flip direction
/// (`(1 − 2x_i)·FD_i ≤ 0`).
pub fn contributing_fds<S: Scalar>(fds: &[FdRecord<S>], x: &BinaryTensor) -> Vec<FdRecord<S>> {
    fds.iter()
        .filter(|r| {
            let delta = if x.get(r.index) == 0 { S::one() } else { -S::one() };
            delta * r.fd <= S::zero()
        })
        .copied()
        .collect()
}

/// Output of the generation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation<S> {
    /// The adversarial input, when generation succeeded.
    pub x_adv: Option<BinaryTensor>,
    pub mask: PerturbationMask<S>,
    pub failure: Option<FailureReason>,
    /// Completed generation iterations.
    pub iterations: usize,
    pub gradient_calls: usize,
    pub forwards: usize,
    /// Margin loss at the start of each iteration.
    pub loss_trace: Vec<S>,
}

/// Grows the perturbation mask until the prediction changes or the iteration
/// cap is hit. Each iteration costs one gradient pass (whose loss doubles as
/// the FD baseline), one forward per candidate and one forward to test the
/// updated input.
pub fn generate<S: Scalar>(m: &NetworkModel<S>, x: &BinaryTensor, y: usize, cfg: &SdaConfig) -> Result<Generation<S>> {
    cfg.check()?;
    let mut mask = PerturbationMask::empty(x.shape());
    let mut cur = x.clone();
    let (mut gradient_calls, mut forwards, mut loss_trace) = (0, 0, Vec::new());
    let (x_adv, failure, iterations) = 'run: {
        for n in 0..cfg.max_iters {
            let gr = input_gradient(m, &cur.to_tensor::<S>(), y, LossKind::CwMargin, &cfg.surrogate)?;
            gradient_calls += 1;
            if n == 0 && gr.logits.argmax() != y {
                return Err(Error::Precondition(format!(
                    "input is already classified as {} instead of {y}",
                    gr.logits.argmax()
                )));
            }
            loss_trace.push(gr.loss);
            let gc = contributing_gradients(&gr.grad, &cur, mask.bits())?;
            let candidates = topk_candidates(&gc, n, cfg.k_init);
            if candidates.is_empty() {
                break 'run (None, Some(FailureReason::NoContributingGradients), n);
            }
            let fds = fd_against(m, &cur, y, &candidates, gr.loss, n, cfg.parallel)?;
            forwards += candidates.len();
            let admitted = contributing_fds(&fds, &cur);
            for rec in &admitted {
                mask.admit(*rec)?;
            }
            cur = mask.apply(x)?;
            forwards += 1;
            if m.predict(&cur.to_tensor::<S>())? != y {
                break 'run (Some(cur), None, n + 1);
            }
            if admitted.is_empty() && candidates.len() < (n + 1).saturating_mul(cfg.k_init) {
                // Every feasible candidate was measured and rejected; the
                // next iteration would see the same input and do the same.
                break 'run (None, Some(FailureReason::Stalled), n + 1);
            }
        }
        (None, Some(FailureReason::IterationCap), cfg.max_iters)
    };
    Ok(Generation {
        x_adv,
        mask,
        failure,
        iterations,
        gradient_calls,
        forwards,
        loss_trace,
    })
}
