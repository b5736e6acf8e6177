//! Independent references for the gradient machinery and the sparse attack.

use itertools::Itertools;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use spikeattack::stbp::{stbp_backward_with, BackwardOptions, ResetPath};
use spikeattack::{ce_loss, BinaryTensor, NetworkModel, Surrogate, Tensor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub worst_coord: usize,
    pub coords_checked: usize,
    /// Largest finite-difference magnitude. A check on a network whose
    /// gradient is near zero everywhere is dominated by rounding noise.
    pub grad_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    /// Sigmoid temperature of the soft spikes.
    pub temp: f64,
    /// Central-difference step.
    pub h: f64,
    /// Random subset size; `None` checks every coordinate.
    pub coords: Option<usize>,
    pub reset_path: ResetPath,
    pub seed: u64,
    /// Combine central differences at `h` and `h/2` as `(4·D(h/2) − D(h))/3`,
    /// cancelling the O(h²) truncation term.
    pub richardson: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            temp: 0.1,
            h: 1e-3,
            coords: Some(256),
            reset_path: ResetPath::Full,
            seed: 0,
            richardson: true,
        }
    }
}

/// Softmax cross-entropy written out directly, for the numeric side, as
/// `log(1 + Σ_{i≠y} exp(z_i − z_y))` so that a nearly saturated loss keeps
/// its relative precision.
fn reference_ce(logits: &[f64], y: usize) -> f64 {
    let gaps: Vec<f64> = (0..logits.len())
        .filter(|&i| i != y)
        .map(|i| logits[i] - logits[y])
        .collect();
    let top = gaps.iter().copied().fold(0.0f64, f64::max);
    if top == 0.0 {
        gaps.iter().map(|d| d.exp()).sum::<f64>().ln_1p()
    } else {
        top + ((-top).exp() + gaps.iter().map(|d| (d - top).exp()).sum::<f64>()).ln()
    }
}

/// Compares backpropagated input gradients of the soft (sigmoid-spike)
/// network against central finite differences of its loss.
///
/// The relative error of a coordinate is `|a − n| / max(|a|, |n|, f·‖n‖∞)`
/// with `f = 1e-2`: the floor keeps coordinates with a near-zero gradient
/// from turning pure finite-difference truncation error into a huge ratio.
pub fn gradcheck_oracle(
    m: &NetworkModel<f64>,
    x: &Tensor<f64>,
    y: usize,
    cfg: &GradcheckConfig,
) -> Result<GradcheckReport> {
    let GradcheckConfig {
        temp,
        h,
        coords,
        reset_path,
        seed,
        richardson,
    } = *cfg;
    let rec = m.forward_soft(x, temp)?;
    let upstream = ce_loss(&rec.logits, y)?.grad;
    let opts = BackwardOptions {
        reset_path,
        param_grads: false,
    };
    let analytic = stbp_backward_with(m, &rec, &Surrogate::Sigmoid { temp }, &upstream, opts)?.input_grad;

    let n = x.numel();
    let idx: Vec<usize> = match coords {
        Some(k) if k < n => {
            let mut v = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..n).collect(),
    };
    let loss_at = |i: usize, d: f64| -> Result<f64> {
        let mut p = x.clone();
        p.data_mut()[i] += d;
        Ok(reference_ce(m.forward_soft(&p, temp)?.logits.data(), y))
    };
    let central = |i: usize, h: f64| -> Result<f64> { Ok((loss_at(i, h)? - loss_at(i, -h)?) / (2.0 * h)) };
    let numeric: Vec<f64> = idx
        .iter()
        .map(|&i| {
            if richardson {
                Ok((4.0 * central(i, h / 2.0)? - central(i, h)?) / 3.0)
            } else {
                central(i, h)
            }
        })
        .collect::<Result<_>>()?;
    let scale = numeric.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 1e-2 * scale;
    let mut report = GradcheckReport {
        max_rel_err: 0.0,
        worst_coord: idx.first().copied().unwrap_or(0),
        coords_checked: idx.len(),
        grad_scale: scale,
    };
    for (&i, &num) in idx.iter().zip(&numeric) {
        let a = analytic.data()[i];
        let denom = a.abs().max(num.abs()).max(floor);
        let err = if denom == 0.0 { 0.0 } else { (a - num).abs() / denom };
        if err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst_coord = i;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPoint {
    pub u: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub closed_form: f64,
}

impl McPoint {
    /// Distance between estimate and closed form in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.closed_form).abs() / self.stderr
    }
}

/// Monte-Carlo estimate of the expected two-point zeroth-order derivative
/// of the Heaviside step with Gaussian smoothing radius `sigma`:
/// `E_z[ |z|/(2σ) · 1(|u − V_th| < |zσ|) ]`, `z ~ N(0, 1)`. The closed form
/// is the unshifted potential-dependent surrogate at `u`.
pub fn mc_zeroth_order_oracle(
    u_values: &[f64],
    v_th: f64,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<McPoint>> {
    if samples < 10_000 {
        return Err(Error::Refused(format!("{samples} samples; at least 10000 required")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma = {sigma} must be positive")));
    }
    let closed = Surrogate::pdsg(0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(u_values
        .iter()
        .map(|&u| {
            let gap = (u - v_th).abs();
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..samples {
                let z: f64 = StandardNormal.sample(&mut rng);
                let g = if gap < (z * sigma).abs() {
                    z.abs() / (2.0 * sigma)
                } else {
                    0.0
                };
                sum += g;
                sq += g * g;
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
            McPoint {
                u,
                estimate: mean,
                stderr: (var / n).sqrt(),
                closed_form: closed.derivative(u, v_th, Some(sigma)),
            }
        })
        .collect())
}

/// Largest number of forward passes the brute-force oracle will spend.
pub const BRUTEFORCE_GUARD: u128 = 2_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Smallest number of pixel flips, at most `max_flips`, that changes the
/// prediction away from `y`, found by exhaustive search. Refuses when the
/// search would exceed [`BRUTEFORCE_GUARD`] forward passes.
pub fn bruteforce_sparse_oracle(
    m: &NetworkModel<f64>,
    x: &BinaryTensor,
    y: usize,
    max_flips: usize,
) -> Result<Option<usize>> {
    let n = x.numel();
    let cost: u128 = (1..=max_flips.min(n)).map(|k| binomial(n, k)).sum();
    if cost > BRUTEFORCE_GUARD {
        return Err(Error::Refused(format!(
            "{cost} forward passes for {n} pixels and {max_flips} flips exceeds the guard of {BRUTEFORCE_GUARD}"
        )));
    }
    let base = x.to_tensor::<f64>();
    for k in 1..=max_flips.min(n) {
        for set in (0..n).combinations(k) {
            let mut p = base.clone();
            for &i in &set {
                p.data_mut()[i] = 1.0 - p.data()[i];
            }
            if m.predict(&p)? != y {
                return Ok(Some(k));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(18, 3), 816);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
    }

    #[test]
    fn reference_ce_matches_closed_form() {
        assert!((reference_ce(&[0.0, 0.0, 0.0], 1) - 3f64.ln()).abs() < 1e-15);
        assert!((reference_ce(&[2.0, -1.0], 1) - (1.0 + 3f64.exp()).ln()).abs() < 1e-14);
        // deep saturation keeps relative precision
        let tiny = reference_ce(&[40.0, 0.0], 0);
        assert!((tiny - (-40f64).exp()).abs() < 1e-15 * tiny);
    }
}
