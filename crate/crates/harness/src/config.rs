//! TOML run configuration. Every field is optional; command-line flags
//! override file values, which override built-in defaults.
//!
//! ```toml
//! seed = 7
//!
//! [train]
//! epochs = 8
//! lr = 0.05
//! surrogate = "atan:alpha=2"
//!
//! [attack]
//! eps = "8/255"
//! steps = 10
//! surrogate = "pdsg:b=0.5"
//!
//! [sda]
//! k_init = 10
//! max_iters = 500
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub sda: SdaSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
    pub batch_size: Option<usize>,
    pub surrogate: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub eps: Option<Number>,
    pub alpha: Option<Number>,
    pub steps: Option<usize>,
    pub loss: Option<String>,
    pub surrogate: Option<String>,
    pub time_shared: Option<bool>,
    pub random_start: Option<bool>,
    pub track_best: Option<bool>,
    pub samples: Option<usize>,
    pub thresholds: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdaSection {
    pub k_init: Option<usize>,
    pub max_iters: Option<usize>,
    pub surrogate: Option<String>,
    pub reduce: Option<bool>,
}

/// A number written either as a float or as a `"p/q"` fraction string.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Float(v) => Ok(*v),
            Number::Text(s) => parse_number(s),
        }
    }
}

/// Parses `"0.03"` or `"8/255"`.
pub fn parse_number(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("'{s}' is not a number or p/q fraction"));
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            p / q
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
    }
}
