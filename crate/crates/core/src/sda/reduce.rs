use std::cmp::Ordering;

use super::generate::{FdRecord, PerturbationMask};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::snn::NetworkModel;
use crate::tensor::BinaryTensor;

/// Masked indices ordered for removal: ascending `|FD|`, then admission
/// iteration, then index.
pub fn reduction_order<S: Scalar>(records: &[FdRecord<S>]) -> Vec<usize> {
    let mut sorted: Vec<&FdRecord<S>> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.fd.abs()
            .partial_cmp(&b.fd.abs())
            .unwrap_or(Ordering::Equal)
            .then(a.iteration.cmp(&b.iteration))
            .then(a.index.cmp(&b.index))
    });
    sorted.into_iter().map(|r| r.index).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefixSearch {
    /// Length of the longest prefix found removable (0 if none).
    pub removable: usize,
    /// Number of predicate evaluations.
    pub probes: usize,
}

/// Binary search for the longest removable prefix of `n` sorted items.
/// `still_ok(j)` reports whether removing items `0..=j` keeps the goal
/// satisfied; it is assumed monotone (true up to some threshold, then false).
pub fn reduce_prefix(n: usize, mut still_ok: impl FnMut(usize) -> Result<bool>) -> Result<PrefixSearch> {
    let (mut lo, mut hi) = (0i64, n as i64 - 1);
    let mut out = PrefixSearch {
        removable: 0,
        probes: 0,
    };
    while lo <= hi {
        let j = (lo + hi) / 2;
        out.probes += 1;
        if still_ok(j as usize)? {
            out.removable = j as usize + 1;
            lo = j + 1;
        } else {
            hi = j - 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub x_final: BinaryTensor,
    /// Indices flipped back to their original value.
    pub removed: Vec<usize>,
    pub forwards: usize,
}

/// Flips back the longest prefix of the reduction order that leaves the
/// input adversarial. Returns `x_adv` unchanged when no prefix qualifies.
pub fn reduce<S: Scalar>(
    m: &NetworkModel<S>,
    x: &BinaryTensor,
    y: usize,
    x_adv: &BinaryTensor,
    mask: &PerturbationMask<S>,
) -> Result<Reduction> {
    let order = reduction_order(mask.records());
    let restored = |len: usize| {
        let mut c = x_adv.clone();
        for &i in &order[..len] {
            c.set(i, x.get(i) == 1);
        }
        c
    };
    let search = reduce_prefix(order.len(), |j| {
        let adversarial = m.predict(&restored(j + 1).to_tensor::<S>())? != y;
        if adversarial && j + 1 == order.len() {
            return Err(Error::Precondition(
                "removing the whole perturbation stays adversarial; the clean input is misclassified".into(),
            ));
        }
        Ok(adversarial)
    })?;
    Ok(Reduction {
        x_final: restored(search.removable),
        removed: order[..search.removable].to_vec(),
        forwards: search.probes,
    })
}
