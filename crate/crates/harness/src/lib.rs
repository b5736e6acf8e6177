//! Training, evaluation and verification harness around `spikeattack`.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod oracle;
pub mod presets;
pub mod train;

pub use error::{Error, Result};
