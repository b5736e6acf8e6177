//! Surrogate derivatives of the Heaviside firing function.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Default calibration offset of the potential-dependent surrogate, in
/// units of the channel standard deviation.
pub const DEFAULT_PDSG_OFFSET: f64 = 0.5;

/// Backward function substituted for `ds/du`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Surrogate {
    /// `1/(2w)` inside `|u - v_th| < w`.
    Rectangular { width: f64 },
    /// `max(0, γ - |u - v_th|) / γ²`.
    Triangle { gamma: f64 },
    /// `α / (2 (1 + (π/2 · α (u - v_th))²))`.
    Atan { alpha: f64 },
    /// Gaussian of the run-time channel standard deviation σ, centred at
    /// `v_th + b_coeff·σ`.
    Pdsg { b_coeff: f64 },
    /// Exact derivative of the soft (sigmoid) firing function.
    Sigmoid { temp: f64 },
}

impl Default for Surrogate {
    fn default() -> Self {
        Surrogate::Pdsg {
            b_coeff: DEFAULT_PDSG_OFFSET,
        }
    }
}

impl Surrogate {
    pub fn rectangular(width: f64) -> Result<Self> {
        Surrogate::Rectangular { width }.validated()
    }

    pub fn triangle(gamma: f64) -> Result<Self> {
        Surrogate::Triangle { gamma }.validated()
    }

    pub fn atan(alpha: f64) -> Result<Self> {
        Surrogate::Atan { alpha }.validated()
    }

    pub fn pdsg(b_coeff: f64) -> Result<Self> {
        Surrogate::Pdsg { b_coeff }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let (name, v, ok) = match self {
            Surrogate::Rectangular { width } => ("width", width, width > 0.0),
            Surrogate::Triangle { gamma } => ("gamma", gamma, gamma > 0.0),
            Surrogate::Atan { alpha } => ("alpha", alpha, alpha > 0.0),
            Surrogate::Pdsg { b_coeff } => ("b_coeff", b_coeff, b_coeff >= 0.0),
            Surrogate::Sigmoid { temp } => ("temp", temp, temp > 0.0),
        };
        if ok && v.is_finite() {
            Ok(self)
        } else {
            Err(Error::invalid(format!("surrogate parameter {name}={v} out of range")))
        }
    }

    pub fn needs_sigma(&self) -> bool {
        matches!(self, Surrogate::Pdsg { .. })
    }

    /// `ds/du` at potential `u`. `sigma` is required by the PDSG only.
    #[inline]
    pub fn derivative<S: Scalar>(&self, u: S, v_th: S, sigma: Option<S>) -> S {
        let x = u - v_th;
        match *self {
            Surrogate::Rectangular { width } => {
                let w = S::lit(width);
                if x.abs() < w {
                    S::one() / (S::lit(2.0) * w)
                } else {
                    S::zero()
                }
            }
            Surrogate::Triangle { gamma } => {
                let g = S::lit(gamma);
                (g - x.abs()).max(S::zero()) / (g * g)
            }
            Surrogate::Atan { alpha } => {
                let a = S::lit(alpha);
                let k = S::lit(FRAC_PI_2) * a * x;
                a / (S::lit(2.0) * (S::one() + k * k))
            }
            Surrogate::Pdsg { b_coeff } => {
                let sigma = sigma.expect("pdsg requires sigma");
                let d = x - S::lit(b_coeff) * sigma;
                (-(d * d) / (S::lit(2.0) * sigma * sigma)).exp() / (S::lit((2.0 * PI).sqrt()) * sigma)
            }
            Surrogate::Sigmoid { temp } => {
                let t = S::lit(temp);
                let s = S::one() / (S::one() + (-x / t).exp());
                s * (S::one() - s) / t
            }
        }
    }
}

/// `(channels, elements per channel)` of one LIF layer's per-timestep shape.
/// Feature vectors form a single channel.
pub fn channel_layout(shape: &[usize]) -> (usize, usize) {
    if shape.len() <= 1 {
        (1, shape.iter().product())
    } else {
        (shape[0], shape[1..].iter().product())
    }
}

/// Elementwise surrogate derivative over a `(channels, ...)` potential
/// tensor; `sigma` supplies one value per channel.
pub fn surrogate_eval<S: Scalar>(kind: &Surrogate, u: &Tensor<S>, v_th: S, sigma: Option<&[S]>) -> Result<Tensor<S>> {
    let (channels, per) = channel_layout(u.shape());
    let sigma = match (kind.needs_sigma(), sigma) {
        (true, None) => return Err(Error::invalid("pdsg surrogate requires channel sigma")),
        (true, Some(s)) if s.len() != channels => {
            return Err(Error::invalid(format!(
                "{} sigma values for {channels} channels",
                s.len()
            )))
        }
        (_, s) => s,
    };
    let data = u
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| kind.derivative(v, v_th, sigma.map(|s| s[i / per.max(1)])))
        .collect();
    Tensor::new(u.shape().to_vec(), data)
}

impl fmt::Display for Surrogate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Surrogate::Rectangular { width } => write!(f, "rect:w={width}"),
            Surrogate::Triangle { gamma } => write!(f, "triangle:gamma={gamma}"),
            Surrogate::Atan { alpha } => write!(f, "atan:alpha={alpha}"),
            Surrogate::Pdsg { b_coeff } => write!(f, "pdsg:b={b_coeff}"),
            Surrogate::Sigmoid { temp } => write!(f, "sigmoid:temp={temp}"),
        }
    }
}

/// Parses `kind[:value]` or `kind[:name=value]`, e.g. `pdsg`, `pdsg:b=0`,
/// `atan:alpha=2`, `rect:1`.
impl FromStr for Surrogate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (k, Some(p)),
            None => (s, None),
        };
        let value = |default: f64| -> Result<f64> {
            match param {
                None => Ok(default),
                Some(p) => {
                    let raw = p.split_once('=').map_or(p, |(_, v)| v);
                    raw.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad surrogate parameter `{p}`")))
                }
            }
        };
        let sg = match kind.trim() {
            "rect" | "rectangular" => Surrogate::Rectangular { width: value(1.0)? },
            "triangle" => Surrogate::Triangle { gamma: value(1.0)? },
            "atan" => Surrogate::Atan { alpha: value(2.0)? },
            "pdsg" => Surrogate::Pdsg {
                b_coeff: value(DEFAULT_PDSG_OFFSET)?,
            },
            "sigmoid" => Surrogate::Sigmoid { temp: value(0.1)? },
            other => return Err(Error::invalid(format!("unknown surrogate `{other}`"))),
        };
        sg.validated()
    }
}
