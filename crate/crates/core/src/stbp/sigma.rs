use super::surrogate::channel_layout;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::snn::ForwardRecord;
use crate::tensor::{channelwise_std, Tensor};

/// Per LIF layer, per channel standard deviation of the membrane potential
/// accumulated over time and spatial positions of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaStats<S> {
    pub layers: Vec<Vec<S>>,
}

/// Computes σ from the potentials of a single sample's forward pass.
pub fn compute_sigma<S: Scalar>(rec: &ForwardRecord<S>) -> Result<SigmaStats<S>> {
    let layers = rec
        .potentials
        .iter()
        .map(|u| {
            let steps = u.shape()[0];
            let (channels, per) = channel_layout(&u.shape()[1..]);
            let view = Tensor::new(vec![steps, channels, per], u.data().to_vec())?;
            channelwise_std(&view)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SigmaStats { layers })
}
