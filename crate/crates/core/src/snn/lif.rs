use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{BinaryTensor, Tensor};

/// Leakage factor and firing threshold shared by every LIF layer of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams<S> {
    pub tau: S,
    pub v_th: S,
}

impl<S: Scalar> Default for LifParams<S> {
    fn default() -> Self {
        Self {
            tau: S::lit(0.5),
            v_th: S::one(),
        }
    }
}

impl<S: Scalar> LifParams<S> {
    pub fn new(tau: S, v_th: S) -> Result<Self> {
        let p = Self { tau, v_th };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > S::zero() && self.tau <= S::one()) {
            return Err(Error::invalid(format!("leakage factor {} outside (0, 1]", self.tau)));
        }
        if !(self.v_th > S::zero()) {
            return Err(Error::invalid(format!("threshold {} must be positive", self.v_th)));
        }
        Ok(())
    }
}

/// How spikes are produced from membrane potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Firing<S> {
    /// Heaviside: spike iff `u >= v_th`.
    Hard,
    /// `sigmoid((u - v_th) / temp)`, also used in the reset gate. Fully
    /// differentiable stand-in used for gradient checking.
    Soft { temp: S },
}

impl<S: Scalar> Firing<S> {
    #[inline]
    pub fn spike(&self, u: S, v_th: S) -> S {
        match *self {
            Firing::Hard => {
                if u >= v_th {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Firing::Soft { temp } => S::one() / (S::one() + (-(u - v_th) / temp).exp()),
        }
    }
}

/// One neuron update over a whole layer, written into `u` and `s`.
///
/// `u` holds the previous potential and `s` the previous spikes on entry.
/// The stored potential is pre-reset; the hard reset happens through the
/// `(1 - s)` gate of the next step.
#[inline]
pub(crate) fn lif_update<S: Scalar>(u: &mut [S], s: &mut [S], current: &[S], p: &LifParams<S>, firing: &Firing<S>) {
    for ((u, s), &i) in u.iter_mut().zip(s.iter_mut()).zip(current) {
        *u = p.tau * *u * (S::one() - *s) + i;
        *s = firing.spike(*u, p.v_th);
    }
}

/// `u = tau * u_prev * (1 - s_prev) + current`, `s = [u >= v_th]`.
pub fn lif_step<S: Scalar>(
    u_prev: &Tensor<S>,
    s_prev: &BinaryTensor,
    current: &Tensor<S>,
    p: &LifParams<S>,
) -> Result<(Tensor<S>, BinaryTensor)> {
    u_prev.check_same_shape(current)?;
    if s_prev.shape() != u_prev.shape() {
        return Err(Error::ShapeMismatch {
            expected: u_prev.shape().to_vec(),
            got: s_prev.shape().to_vec(),
        });
    }
    let mut u = u_prev.data().to_vec();
    let mut s: Vec<S> = s_prev.to_tensor::<S>().into_data();
    lif_update(&mut u, &mut s, current.data(), p, &Firing::Hard);
    let spikes = BinaryTensor::new(
        u_prev.shape().to_vec(),
        s.iter().map(|&v| (v == S::one()) as u8).collect(),
    )?;
    Ok((Tensor::new(u_prev.shape().to_vec(), u)?, spikes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(u_prev: f64, s_prev: u8, current: f64) -> (f64, u8) {
        let p = LifParams::default();
        let (u, s) = lif_step(
            &Tensor::vector(vec![u_prev]),
            &BinaryTensor::new(vec![1], vec![s_prev]).unwrap(),
            &Tensor::vector(vec![current]),
            &p,
        )
        .unwrap();
        (u.data()[0], s.get(0))
    }

    #[test]
    fn hand_evaluated_steps() {
        let (u, s) = step(0.8, 0, 0.4);
        assert!((u - 0.8).abs() < 1e-15);
        assert_eq!(s, 0);

        let (u, s) = step(0.8, 0, 0.8);
        assert!((u - 1.2).abs() < 1e-15);
        assert_eq!(s, 1);
        // fired: the leak term of the following step vanishes
        let (u_next, _) = step(u, s, 0.0);
        assert_eq!(u_next, 0.0);

        assert_eq!(step(0.0, 0, 0.0), (0.0, 0));
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(step(0.0, 0, 1.0).1, 1);
        assert_eq!(step(0.0, 0, 0.999_999).1, 0);
    }

    #[test]
    fn reset_ignores_previous_potential() {
        for u_prev in [0.0, 1.3, 7.5, -2.0] {
            assert_eq!(step(u_prev, 1, 0.25), step(0.0, 1, 0.25));
        }
    }

    #[test]
    fn drive_is_affine_with_unit_slope() {
        let base = step(0.6, 0, 0.0).0;
        for c in [-1.0, 0.1, 0.35, 2.0] {
            assert!((step(0.6, 0, c).0 - (base + c)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(LifParams::new(0.0f32, 1.0).is_err());
        assert!(LifParams::new(1.5f32, 1.0).is_err());
        assert!(LifParams::new(0.5f32, 0.0).is_err());
        assert!(LifParams::new(1.0f32, 1.0).is_ok());
    }

    #[test]
    fn soft_spike_midpoint_and_saturation() {
        let f = Firing::Soft { temp: 1e-3 };
        assert_eq!(f.spike(1.0f64, 1.0), 0.5);
        assert!((f.spike(1.05f64, 1.0) - 1.0).abs() < 1e-6);
        assert!(f.spike(0.95f64, 1.0) < 1e-6);
    }
}
