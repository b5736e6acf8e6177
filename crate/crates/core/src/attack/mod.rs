//! Adversarial attacks: ℓ∞ gradient attacks and the shared result record.

mod linf;

pub use linf::{fgsm, pgd, AttackConfig};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Fgsm,
    Pgd,
    Sda,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fgsm => "fgsm",
            Method::Pgd => "pgd",
            Method::Sda => "sda",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "fgsm" => Ok(Method::Fgsm),
            "pgd" => Ok(Method::Pgd),
            "sda" => Ok(Method::Sda),
            _ => Err(crate::Error::invalid(format!("unknown attack method '{s}'"))),
        }
    }
}

/// Why an attack ended without changing the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    /// The ℓ∞ budget was spent without flipping the prediction.
    BudgetExhausted,
    /// The iteration cap was reached.
    IterationCap,
    /// No input coordinate had a gradient pointing in a feasible direction.
    NoContributingGradients,
    /// Every candidate was evaluated and none was admitted; further
    /// iterations would repeat the same computation.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult<S> {
    pub method: Method,
    pub label: usize,
    pub x_adv: Tensor<S>,
    /// Fresh-forward prediction on `x_adv`.
    pub pred: usize,
    pub success: bool,
    pub linf: S,
    pub l0: usize,
    /// Sparse attacks only: ℓ0 of the generated perturbation before reduction.
    pub l0_before_reduction: Option<usize>,
    pub iterations: usize,
    pub gradient_calls: usize,
    /// Forward-only passes, not counting those inside gradient calls.
    pub forwards: usize,
    pub loss_trace: Vec<S>,
    pub failure: Option<FailureReason>,
}

/// Flat, serializable summary of one attack, one per output line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub sample: usize,
    pub method: Method,
    pub label: usize,
    pub pred: usize,
    pub success: bool,
    pub linf: f64,
    pub l0: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0_before: Option<usize>,
    pub iterations: usize,
    pub gradient_calls: usize,
    pub forwards: usize,
    pub loss_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureReason>,
}

impl<S: Scalar> AttackResult<S> {
    pub fn record(&self, sample: usize) -> AttackRecord {
        AttackRecord {
            sample,
            method: self.method,
            label: self.label,
            pred: self.pred,
            success: self.success,
            linf: self.linf.as_f64(),
            l0: self.l0,
            l0_before: self.l0_before_reduction,
            iterations: self.iterations,
            gradient_calls: self.gradient_calls,
            forwards: self.forwards,
            loss_trace: self.loss_trace.iter().map(|v| v.as_f64()).collect(),
            failure: self.failure,
        }
    }
}
