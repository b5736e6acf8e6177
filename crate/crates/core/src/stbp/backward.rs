//! Reverse sweep over timesteps and layers.
//!
//! For every LIF layer the gradient reaching the spikes `s[t]` has a
//! spatial part (through the next layer at `t`) and a temporal part through
//! `u[t+1] = τ u[t] (1 - s[t]) + I[t+1]`, i.e. `∂u[t+1]/∂u[t] = τ(1 - s[t])`
//! and `∂u[t+1]/∂s[t] = -τ u[t]`.

use super::sigma::{compute_sigma, SigmaStats};
use super::surrogate::{channel_layout, Surrogate};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::snn::{ForwardRecord, LayerSpec, NetworkModel, ParamGrads};
use crate::tensor::Tensor;

/// Treatment of the `∂u[t+1]/∂s[t]` reset term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResetPath {
    #[default]
    Full,
    /// Drop the reset term, as when the reset gate is detached.
    Detached,
    /// Flip its sign. Only useful to check that a gradient checker notices.
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BackwardOptions {
    pub reset_path: ResetPath,
    /// Also accumulate weight and bias gradients.
    pub param_grads: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backward<S> {
    /// `∂L/∂x`, shaped like the network input `(T, ...)`.
    pub input_grad: Tensor<S>,
    /// Per layer, present for parameterized layers when requested.
    pub param_grads: Vec<Option<ParamGrads<S>>>,
    /// σ statistics used by a PDSG surrogate.
    pub sigma: Option<SigmaStats<S>>,
}

fn check_record<S: Scalar>(m: &NetworkModel<S>, rec: &ForwardRecord<S>, loss_grad: &Tensor<S>) -> Result<()> {
    let lif = m.lif_layers();
    let steps = m.timesteps();
    let bad = |what: &str| Err(Error::invalid(format!("forward record does not match model: {what}")));
    if rec.potentials.len() != lif.len() || rec.spikes.len() != lif.len() {
        return bad("lif layer count");
    }
    for (k, &l) in lif.iter().enumerate() {
        let mut shape = vec![steps];
        shape.extend_from_slice(m.layer_input_shape(l));
        if rec.potentials[k].shape() != shape.as_slice() || rec.spikes[k].shape() != shape.as_slice() {
            return bad("lif state shape");
        }
    }
    if rec.head_outputs.shape() != [steps, m.num_classes()] {
        return bad("head output shape");
    }
    if rec.layer_inputs.len() != m.layers().len() {
        return bad("layer count");
    }
    if loss_grad.shape() != [m.num_classes()] {
        return Err(Error::ShapeMismatch {
            expected: vec![m.num_classes()],
            got: loss_grad.shape().to_vec(),
        });
    }
    Ok(())
}

/// Backpropagates `loss_grad` (gradient at the logits) through a recorded
/// forward pass and returns `∂L/∂x`.
pub fn stbp_backward<S: Scalar>(
    m: &NetworkModel<S>,
    rec: &ForwardRecord<S>,
    sg: &Surrogate,
    loss_grad: &Tensor<S>,
) -> Result<Backward<S>> {
    stbp_backward_with(m, rec, sg, loss_grad, BackwardOptions::default())
}

pub fn stbp_backward_with<S: Scalar>(
    m: &NetworkModel<S>,
    rec: &ForwardRecord<S>,
    sg: &Surrogate,
    loss_grad: &Tensor<S>,
    opts: BackwardOptions,
) -> Result<Backward<S>> {
    check_record(m, rec, loss_grad)?;
    let sigma = if sg.needs_sigma() {
        Some(compute_sigma(rec)?)
    } else {
        None
    };
    let layers = m.layers();
    let steps = m.timesteps();
    let tau = m.lif().tau;
    let v_th = m.lif().v_th;
    let lif_layers = m.lif_layers();
    let mut lif_of_layer = vec![usize::MAX; layers.len()];
    for (k, &l) in lif_layers.iter().enumerate() {
        lif_of_layer[l] = k;
    }

    let mut grad_u_next: Vec<Vec<S>> = lif_layers
        .iter()
        .map(|&l| vec![S::zero(); m.layer_input_shape(l).iter().product()])
        .collect();
    let mut param_grads: Vec<Option<ParamGrads<S>>> = layers
        .iter()
        .map(|l| {
            if opts.param_grads {
                ParamGrads::zeros_like(l)
            } else {
                None
            }
        })
        .collect();
    if opts.param_grads
        && rec
            .layer_inputs
            .iter()
            .zip(layers)
            .any(|(v, l)| l.params().is_some() && v.len() != steps)
    {
        return Err(Error::invalid("forward record lacks layer inputs for weight gradients"));
    }
    let in_numel: usize = m.input_shape().iter().product();
    let mut input_grad = vec![S::zero(); steps * in_numel];
    let inv_t = S::one() / S::lit(steps as f64);

    for t in (0..steps).rev() {
        let mut g: Vec<S> = loss_grad.data().iter().map(|&v| v * inv_t).collect();
        for (l, layer) in layers.iter().enumerate().rev() {
            let in_shape = m.layer_input_shape(l);
            if let LayerSpec::Lif = layer {
                let k = lif_of_layer[l];
                let u = rec.potentials[k].slice_data(t);
                let s = rec.spikes[k].slice_data(t);
                let (_, per) = channel_layout(in_shape);
                let layer_sigma = sigma.as_ref().map(|st| &st.layers[k]);
                let next = &mut grad_u_next[k];
                for i in 0..g.len() {
                    let reset = next[i] * tau * u[i];
                    let grad_s = match opts.reset_path {
                        ResetPath::Full => g[i] - reset,
                        ResetPath::Detached => g[i],
                        ResetPath::Inverted => g[i] + reset,
                    };
                    let sig = layer_sigma.map(|c| c[i / per]);
                    let grad_u = grad_s * sg.derivative(u[i], v_th, sig) + next[i] * tau * (S::one() - s[i]);
                    next[i] = grad_u;
                    g[i] = grad_u;
                }
            } else {
                if let Some(pg) = param_grads[l].as_mut() {
                    layer.accumulate_param_grads(&rec.layer_inputs[l][t], in_shape, &g, pg);
                }
                let mut gi = vec![S::zero(); in_shape.iter().product()];
                layer.backward_input(&g, in_shape, &mut gi);
                g = gi;
            }
        }
        input_grad[t * in_numel..(t + 1) * in_numel].copy_from_slice(&g);
    }

    let input_grad = Tensor::new(m.full_input_shape(), input_grad)?;
    if !input_grad.is_finite() {
        return Err(Error::NonFinite("input gradient"));
    }
    Ok(Backward {
        input_grad,
        param_grads,
        sigma,
    })
}
