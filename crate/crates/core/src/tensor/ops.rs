use std::cmp::Ordering;

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower bound applied to every channel-wise standard deviation so that
/// Gaussian surrogates stay finite on constant-potential channels.
pub const SIGMA_FLOOR: f64 = 1e-5;

/// Elementwise sign with `sign(0) = 0`.
pub fn sign<S: Scalar>(t: &Tensor<S>) -> Tensor<S> {
    t.map(|v| {
        if v > S::zero() {
            S::one()
        } else if v < S::zero() {
            -S::one()
        } else {
            S::zero()
        }
    })
}

pub fn clamp<S: Scalar>(t: &Tensor<S>, lo: S, hi: S) -> Result<Tensor<S>> {
    if !(lo <= hi) {
        return Err(Error::invalid(format!("clamp bounds lo={lo} > hi={hi}")));
    }
    Ok(t.map(|v| v.max(lo).min(hi)))
}

/// Projects `x` onto the ℓ∞ ball of radius `eps` around `center`.
///
/// The ball edges are pulled inward by at most one ulp where rounding of
/// `c ± eps` would otherwise leave `|result - c| > eps` in floating point.
pub fn linf_project<S: Scalar>(x: &Tensor<S>, center: &Tensor<S>, eps: S) -> Result<Tensor<S>> {
    if !(eps >= S::zero()) {
        return Err(Error::invalid(format!("negative projection radius {eps}")));
    }
    x.zip_map(center, |v, c| {
        let mut hi = c + eps;
        while hi - c > eps {
            hi = hi.next_down();
        }
        let mut lo = c - eps;
        while c - lo > eps {
            lo = lo.next_up();
        }
        v.max(lo).min(hi)
    })
}

/// `max_i |a_i - b_i|`.
pub fn linf_distance<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<S> {
    a.check_same_shape(b)?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .fold(S::zero(), |m, (&x, &y)| m.max((x - y).abs())))
}

/// Indices of the `k` largest values, ordered by descending value and then
/// ascending flat index. Returns `min(k, len)` indices.
pub fn argtopk<S: Scalar>(values: &[S], k: usize) -> Vec<usize> {
    let k = k.min(values.len());
    if k == 0 {
        return Vec::new();
    }
    let order = |&a: &usize, &b: &usize| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    };
    let mut idx: Vec<usize> = (0..values.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, order);
        idx.truncate(k);
    }
    idx.sort_unstable_by(order);
    idx
}

/// Count of strictly nonzero entries.
pub fn l0_norm<S: Scalar>(delta: &Tensor<S>) -> usize {
    delta.data().iter().filter(|&&v| v != S::zero()).count()
}

/// Population standard deviation per channel of a `(time, channel, spatial...)`
/// tensor, pooled over time and spatial positions and floored at
/// [`SIGMA_FLOOR`].
pub fn channelwise_std<S: Scalar>(u_all: &Tensor<S>) -> Result<Vec<S>> {
    let shape = u_all.shape();
    if shape.len() < 2 {
        return Err(Error::invalid(
            "channel-wise statistics need a (time, channel, ...) tensor",
        ));
    }
    let (steps, channels) = (shape[0], shape[1]);
    let spatial: usize = shape[2..].iter().product();
    if steps * spatial == 0 {
        return Err(Error::invalid("empty channel in standard deviation"));
    }
    let n = (steps * spatial) as f64;
    let data = u_all.data();
    let channel_values = |c: usize| {
        (0..steps).flat_map(move |t| {
            let base = (t * channels + c) * spatial;
            data[base..base + spatial].iter().map(|v| v.as_f64())
        })
    };
    Ok((0..channels)
        .map(|c| {
            let mean = channel_values(c).sum::<f64>() / n;
            let var = channel_values(c).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            S::lit(var.sqrt().max(SIGMA_FLOOR))
        })
        .collect())
}
