//! Sparse dynamic attack on binary inputs.
//!
//! Generation repeatedly picks the unmasked pixels whose gradient points in
//! a feasible flip direction, measures the exact effect of flipping each one
//! with a forward pass, and admits the flips that raise the misclassification
//! pressure. Reduction then undoes the least useful flips by binary search
//! while the input stays adversarial.

mod generate;
mod reduce;

pub use generate::{
    contributing_fds, contributing_gradients, finite_difference_batch, generate, topk_candidates, FdBatch, FdRecord,
    Generation, PerturbationMask, SdaConfig,
};
pub use reduce::{reduce, reduce_prefix, reduction_order, PrefixSearch, Reduction};

use crate::attack::{AttackResult, FailureReason, Method};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::snn::NetworkModel;
use crate::tensor::BinaryTensor;

/// Everything an SDA run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SdaOutcome<S> {
    pub result: AttackResult<S>,
    /// Final binary input (`x` itself on failure).
    pub x_final: BinaryTensor,
    pub mask: PerturbationMask<S>,
}

/// Generation followed, on success, by reduction. The reported success is
/// re-checked with a fresh forward pass on the final input.
pub fn sda_attack<S: Scalar>(
    m: &NetworkModel<S>,
    x: &BinaryTensor,
    y: usize,
    cfg: &SdaConfig,
) -> Result<SdaOutcome<S>> {
    let gen = generate(m, x, y, cfg)?;
    let mut forwards = gen.forwards;
    let l0_before = gen.mask.len();
    let (x_final, failure) = match (&gen.x_adv, gen.failure) {
        (Some(x_adv), None) if cfg.reduce => {
            let red = reduce(m, x, y, x_adv, &gen.mask)?;
            forwards += red.forwards;
            (red.x_final, None)
        }
        (Some(x_adv), None) => (x_adv.clone(), None),
        (_, failure) => (x.clone(), failure),
    };

    let x_final_t = x_final.to_tensor::<S>();
    let logits = m.logits(&x_final_t)?;
    forwards += 1;
    let pred = logits.argmax();
    let success = pred != y;
    let l0 = x_final.hamming(x);
    let result = AttackResult {
        method: Method::Sda,
        label: y,
        linf: if l0 > 0 { S::one() } else { S::zero() },
        x_adv: x_final_t,
        pred,
        success,
        l0,
        l0_before_reduction: Some(if success { l0_before } else { l0 }),
        iterations: gen.iterations,
        gradient_calls: gen.gradient_calls,
        forwards,
        loss_trace: gen.loss_trace,
        failure: if success {
            None
        } else {
            Some(failure.unwrap_or(FailureReason::IterationCap))
        },
    };
    Ok(SdaOutcome {
        result,
        x_final,
        mask: gen.mask,
    })
}
