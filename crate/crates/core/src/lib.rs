//! Spiking neural network inference, spatial-temporal backpropagation with
//! surrogate gradients, and adversarial attacks on SNN classifiers.
//!
//! The numeric core is generic over [`Scalar`] (`f32` for inference and
//! attacks, `f64` for gradient checks); the aliases below name the common
//! instantiations.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
mod bytes;
pub mod coding;
pub mod error;
pub mod loss;
pub mod scalar;
pub mod sda;
pub mod snn;
pub mod stbp;
pub mod tensor;

pub use error::{Error, Result};
pub use loss::{ce_loss, cw_loss, LossKind, LossValue};
pub use scalar::{DType, Scalar};
pub use snn::{ForwardRecord, InputCoding, LayerSpec, LifParams, NetworkModel};
pub use stbp::{input_gradient, GradResult, Surrogate};
pub use tensor::{BinaryTensor, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = NetworkModel<f32>;
pub type Model64 = NetworkModel<f64>;
pub type Record32 = ForwardRecord<f32>;
pub type Record64 = ForwardRecord<f64>;
