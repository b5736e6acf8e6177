//! Spatial-temporal backpropagation with pluggable surrogate gradients.

mod backward;
mod sigma;
mod surrogate;

pub use backward::{stbp_backward, stbp_backward_with, Backward, BackwardOptions, ResetPath};
pub use sigma::{compute_sigma, SigmaStats};
pub use surrogate::{channel_layout, surrogate_eval, Surrogate, DEFAULT_PDSG_OFFSET};

use crate::error::Result;
use crate::loss::LossKind;
use crate::scalar::Scalar;
use crate::snn::NetworkModel;
use crate::tensor::Tensor;

/// Input gradient together with the quantities computed on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult<S> {
    /// `∂L/∂x`, same shape as `x`.
    pub grad: Tensor<S>,
    pub loss: S,
    pub logits: Tensor<S>,
    /// σ of this very input, present for PDSG surrogates.
    pub sigma: Option<SigmaStats<S>>,
}

/// Forward pass, loss, and backward pass for one labelled input. A PDSG
/// surrogate takes its σ from this input's own forward record.
pub fn input_gradient<S: Scalar>(
    m: &NetworkModel<S>,
    x: &Tensor<S>,
    y: usize,
    loss: LossKind,
    sg: &Surrogate,
) -> Result<GradResult<S>> {
    let rec = m.forward(x)?;
    let lv = loss.eval(&rec.logits, y)?;
    let back = stbp_backward(m, &rec, sg, &lv.grad)?;
    Ok(GradResult {
        grad: back.input_grad,
        loss: lv.loss,
        logits: rec.logits,
        sigma: back.sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{Conv2d, Dense, InputCoding, LayerSpec, LifParams};
    use proptest::prelude::*;

    fn dense_net(w: Vec<f64>, b: Vec<f64>, timesteps: usize) -> NetworkModel<f64> {
        NetworkModel::new(
            vec![2],
            vec![
                LayerSpec::Dense(Dense::new(2, 2, w, b).unwrap()),
                LayerSpec::Lif,
                LayerSpec::Head(Dense::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2]).unwrap()),
            ],
            LifParams::default(),
            timesteps,
            InputCoding::Direct,
        )
        .unwrap()
    }

    #[test]
    fn single_step_matches_hand_chain_rule() {
        let w = vec![0.5, -0.3, 0.8, 0.2];
        let m = dense_net(w.clone(), vec![0.1, 0.0], 1);
        let x = Tensor::new(vec![1, 2], vec![1.0, 0.5]).unwrap();
        let rec = m.forward(&x).unwrap();
        let u = [0.5 - 0.15 + 0.1, 0.8 + 0.1];
        assert!((rec.potentials[0].data()[0] - u[0]).abs() < 1e-15);
        let upstream = Tensor::vector(vec![0.7, -1.1]);
        let sg = Surrogate::Atan { alpha: 2.0 };
        let back = stbp_backward(&m, &rec, &sg, &upstream).unwrap();
        let d: Vec<f64> = (0..2)
            .map(|i| {
                let k = std::f64::consts::FRAC_PI_2 * 2.0 * (u[i] - 1.0);
                2.0 / (2.0 * (1.0 + k * k)) * upstream.data()[i]
            })
            .collect();
        let expected = [w[0] * d[0] + w[2] * d[1], w[1] * d[0] + w[3] * d[1]];
        for (g, e) in back.input_grad.data().iter().zip(expected) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let m = dense_net(vec![0.5, -0.3, 0.8, 0.2], vec![0.1, 0.0], 3);
        let x = Tensor::from_fn(&[3, 2], |i| i as f64 * 0.4);
        let rec = m.forward(&x).unwrap();
        let back = stbp_backward(&m, &rec, &Surrogate::default(), &Tensor::zeros(&[2])).unwrap();
        assert!(back.input_grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mismatched_record_is_rejected() {
        let m = dense_net(vec![0.5, -0.3, 0.8, 0.2], vec![0.1, 0.0], 3);
        let other = dense_net(vec![0.5, -0.3, 0.8, 0.2], vec![0.1, 0.0], 2);
        let rec = other.forward(&Tensor::zeros(&[2, 2])).unwrap();
        assert!(stbp_backward(&m, &rec, &Surrogate::default(), &Tensor::zeros(&[2])).is_err());
        let rec = m.forward(&Tensor::zeros(&[3, 2])).unwrap();
        assert!(stbp_backward(&m, &rec, &Surrogate::default(), &Tensor::zeros(&[3])).is_err());
    }

    fn conv_net() -> NetworkModel<f64> {
        let mut conv = Conv2d::zeros(1, 2, 3, 1, 1);
        conv.weight
            .iter_mut()
            .enumerate()
            .for_each(|(i, w)| *w = 0.6 * ((i as f64) * 1.7).sin());
        conv.bias = vec![0.3, 0.2];
        let mut dense = Dense::zeros(8, 3);
        dense
            .weight
            .iter_mut()
            .enumerate()
            .for_each(|(i, w)| *w = 0.8 * ((i as f64) * 0.9).cos());
        dense.bias = vec![0.4, 0.1, 0.3];
        let mut head = Dense::zeros(3, 2);
        head.weight = vec![1.0, -0.5, 0.7, -0.8, 0.6, 0.2];
        NetworkModel::new(
            vec![1, 4, 4],
            vec![
                LayerSpec::Conv2d(conv),
                LayerSpec::Lif,
                LayerSpec::AvgPool2d { kernel: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense(dense),
                LayerSpec::Lif,
                LayerSpec::Head(head),
            ],
            LifParams { tau: 0.5, v_th: 1.0 },
            4,
            InputCoding::Direct,
        )
        .unwrap()
    }

    fn soft_loss(m: &NetworkModel<f64>, x: &Tensor<f64>, temp: f64) -> f64 {
        let rec = m.forward_soft(x, temp).unwrap();
        LossKind::CrossEntropy.eval(&rec.logits, 1).unwrap().loss
    }

    fn max_rel_err(reset: ResetPath) -> f64 {
        let m = conv_net();
        let temp = 0.1;
        let x = Tensor::from_fn(&[4, 1, 4, 4], |i| 0.5 + 0.5 * ((i as f64) * 0.61).sin());
        let rec = m.forward_soft(&x, temp).unwrap();
        let lv = LossKind::CrossEntropy.eval(&rec.logits, 1).unwrap();
        let opts = BackwardOptions {
            reset_path: reset,
            param_grads: false,
        };
        let back = stbp_backward_with(&m, &rec, &Surrogate::Sigmoid { temp }, &lv.grad, opts).unwrap();
        let h = 1e-3;
        let scale = back.input_grad.max_abs();
        let mut worst: f64 = 0.0;
        for i in 0..x.numel() {
            let (mut a, mut b) = (x.clone(), x.clone());
            a.data_mut()[i] += h;
            b.data_mut()[i] -= h;
            let fd = (soft_loss(&m, &a, temp) - soft_loss(&m, &b, temp)) / (2.0 * h);
            let g = back.input_grad.data()[i];
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-2 * scale));
        }
        worst
    }

    #[test]
    fn soft_gradients_match_central_differences() {
        let err = max_rel_err(ResetPath::Full);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn inverted_reset_path_is_detected() {
        let err = max_rel_err(ResetPath::Inverted);
        assert!(err > 1e-2, "mutation went unnoticed: {err}");
    }

    #[test]
    fn weight_gradients_match_central_differences() {
        let m = conv_net();
        let temp = 0.1;
        let x = Tensor::from_fn(&[4, 1, 4, 4], |i| 0.5 + 0.5 * ((i as f64) * 0.61).sin());
        let rec = m.forward_soft(&x, temp).unwrap();
        let lv = LossKind::CrossEntropy.eval(&rec.logits, 1).unwrap();
        let opts = BackwardOptions {
            reset_path: ResetPath::Full,
            param_grads: true,
        };
        let back = stbp_backward_with(&m, &rec, &Surrogate::Sigmoid { temp }, &lv.grad, opts).unwrap();
        let h = 1e-4;
        for (l, grads) in back.param_grads.iter().enumerate() {
            let Some(grads) = grads else { continue };
            for (j, &g) in grads.weight.iter().enumerate().step_by(3) {
                let perturbed = |delta: f64| {
                    let mut mm = m.clone();
                    let (_, w, _) = mm.params_mut().find(|(i, _, _)| *i == l).unwrap();
                    w[j] += delta;
                    soft_loss(&mm, &x, temp)
                };
                let fd = (perturbed(h) - perturbed(-h)) / (2.0 * h);
                assert!(
                    (g - fd).abs() <= 1e-6 + 1e-4 * fd.abs(),
                    "layer {l} weight {j}: {g} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn pdsg_sigma_follows_the_input() {
        let m = conv_net();
        let a = Tensor::from_fn(&[4, 1, 4, 4], |i| ((i * 7) % 5) as f64 * 0.25);
        let b = Tensor::from_fn(&[4, 1, 4, 4], |i| ((i * 3) % 4) as f64 * 0.1);
        let ga = input_gradient(&m, &a, 0, LossKind::CwMargin, &Surrogate::default()).unwrap();
        let gb = input_gradient(&m, &b, 0, LossKind::CwMargin, &Surrogate::default()).unwrap();
        assert_ne!(ga.sigma, gb.sigma);
        assert_eq!(
            ga,
            input_gradient(&m, &a, 0, LossKind::CwMargin, &Surrogate::default()).unwrap()
        );
        assert_eq!(ga.grad.shape(), &[4, 1, 4, 4]);
    }

    proptest! {
        #[test]
        fn pdsg_is_symmetric_about_its_centre(d in 0.0f64..5.0, sigma in 0.05f64..5.0, b in 0.0f64..1.0) {
            let sg = Surrogate::Pdsg { b_coeff: b };
            let centre = 1.0 + b * sigma;
            let l = sg.derivative(centre - d, 1.0, Some(sigma));
            let r = sg.derivative(centre + d, 1.0, Some(sigma));
            prop_assert!((l - r).abs() <= 1e-12 * l.abs());
        }
    }
}
