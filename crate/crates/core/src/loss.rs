//! Classification losses on time-averaged logits with analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    CrossEntropy,
    /// `max(f_y - max_{i != y} f_i, 0)`.
    CwMargin,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            "cw" | "cw-margin" => Ok(LossKind::CwMargin),
            other => Err(Error::invalid(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue<S> {
    pub loss: S,
    /// Gradient with respect to the logits.
    pub grad: Tensor<S>,
}

impl LossKind {
    pub fn eval<S: Scalar>(self, logits: &Tensor<S>, y: usize) -> Result<LossValue<S>> {
        match self {
            LossKind::CrossEntropy => ce_loss(logits, y),
            LossKind::CwMargin => cw_loss(logits, y),
        }
    }
}

fn check_label<S: Scalar>(logits: &Tensor<S>, y: usize) -> Result<()> {
    if y >= logits.numel() {
        return Err(Error::InvalidLabel {
            label: y,
            classes: logits.numel(),
        });
    }
    Ok(())
}

/// Softmax cross-entropy.
pub fn ce_loss<S: Scalar>(logits: &Tensor<S>, y: usize) -> Result<LossValue<S>> {
    check_label(logits, y)?;
    let z = logits.data();
    let max = z.iter().copied().fold(S::neg_infinity(), S::max);
    let exp: Vec<S> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: S = exp.iter().copied().sum();
    let loss = total.ln() + max - z[y];
    let mut grad: Vec<S> = exp.iter().map(|&e| e / total).collect();
    // p_y − 1 written as −Σ_{i≠y} p_i, exact even when p_y rounds to 1
    grad[y] = -grad
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != y)
        .map(|(_, &p)| p)
        .sum::<S>();
    Ok(LossValue {
        loss,
        grad: Tensor::vector(grad),
    })
}

/// Index of the largest logit other than `y`, lowest index on ties.
pub fn best_other<S: Scalar>(logits: &[S], y: usize) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in logits.iter().enumerate() {
        if i != y && (best == usize::MAX || v > logits[best]) {
            best = i;
        }
    }
    best
}

/// Carlini–Wagner margin loss with its subgradient.
pub fn cw_loss<S: Scalar>(logits: &Tensor<S>, y: usize) -> Result<LossValue<S>> {
    check_label(logits, y)?;
    if logits.numel() < 2 {
        return Err(Error::invalid("margin loss needs at least two classes"));
    }
    let z = logits.data();
    let other = best_other(z, y);
    let margin = z[y] - z[other];
    let mut grad = vec![S::zero(); z.len()];
    let loss = if margin > S::zero() {
        grad[y] = S::one();
        grad[other] = -S::one();
        margin
    } else {
        S::zero()
    };
    Ok(LossValue {
        loss,
        grad: Tensor::vector(grad),
    })
}
