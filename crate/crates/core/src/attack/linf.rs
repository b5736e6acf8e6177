use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttackResult, FailureReason, Method};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::scalar::Scalar;
use crate::snn::NetworkModel;
use crate::stbp::{input_gradient, Surrogate};
use crate::tensor::{clamp, l0_norm, linf_distance, linf_project, sign, Tensor};

/// Settings shared by FGSM and PGD. Distances are in input units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub eps: f64,
    /// PGD step size.
    pub alpha: f64,
    /// PGD iteration count.
    pub steps: usize,
    pub loss: LossKind,
    pub surrogate: Surrogate,
    pub lo: f64,
    pub hi: f64,
    /// Sum the gradient over the time axis and apply the same step at every
    /// timestep. Keeps directly coded inputs replicated, i.e. the attack
    /// perturbs the underlying image rather than each frame separately.
    pub time_shared: bool,
    /// PGD returns the iterate with the highest loss, preferring successful
    /// ones, instead of the last iterate. Off by default.
    pub track_best: bool,
    /// Seed for a uniform random start inside the ball. PGD starts at `x`
    /// when unset.
    pub random_start: Option<u64>,
}

impl AttackConfig {
    /// `alpha = eps / 4` and ten steps, over the `[0, 1]` domain.
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            alpha: eps / 4.0,
            steps: 10,
            loss: LossKind::CrossEntropy,
            surrogate: Surrogate::default(),
            lo: 0.0,
            hi: 1.0,
            time_shared: false,
            track_best: false,
            random_start: None,
        }
    }

    fn check(&self, iterative: bool) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid(format!(
                "eps = {} must be finite and non-negative",
                self.eps
            )));
        }
        if !(self.lo < self.hi) {
            return Err(Error::invalid(format!(
                "clip domain [{}, {}] is empty",
                self.lo, self.hi
            )));
        }
        if iterative {
            if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                return Err(Error::invalid(format!("alpha = {} must be positive", self.alpha)));
            }
            if self.steps == 0 {
                return Err(Error::invalid("steps must be at least 1"));
            }
        }
        self.surrogate.validated()?;
        Ok(())
    }
}

fn check_domain<S: Scalar>(x: &Tensor<S>, lo: S, hi: S) -> Result<()> {
    if x.data().iter().any(|&v| !(v >= lo && v <= hi)) {
        return Err(Error::Precondition(format!("input outside clip domain [{lo}, {hi}]")));
    }
    Ok(())
}

/// Replaces each entry by the sum over the leading (time) axis.
fn shared_over_time<S: Scalar>(g: &Tensor<S>) -> Tensor<S> {
    let steps = g.shape()[0];
    let n = g.slice_len();
    let mut total = vec![S::zero(); n];
    for t in 0..steps {
        for (acc, &v) in total.iter_mut().zip(g.slice_data(t)) {
            *acc += v;
        }
    }
    Tensor::from_fn(g.shape(), |i| total[i % n])
}

struct Ctx<'a, S> {
    m: &'a NetworkModel<S>,
    x: &'a Tensor<S>,
    y: usize,
    cfg: &'a AttackConfig,
    lo: S,
    hi: S,
    gradient_calls: usize,
}

impl<S: Scalar> Ctx<'_, S> {
    fn ascent_direction(&mut self, at: &Tensor<S>) -> Result<(Tensor<S>, S, Tensor<S>)> {
        let gr = input_gradient(self.m, at, self.y, self.cfg.loss, &self.cfg.surrogate)?;
        self.gradient_calls += 1;
        let g = if self.cfg.time_shared {
            shared_over_time(&gr.grad)
        } else {
            gr.grad
        };
        Ok((sign(&g), gr.loss, gr.logits))
    }

    fn step(&self, at: &Tensor<S>, dir: &Tensor<S>, size: S, eps: S) -> Result<Tensor<S>> {
        let moved = at.zip_map(dir, |a, d| a + size * d)?;
        clamp(&linf_project(&moved, self.x, eps)?, self.lo, self.hi)
    }

    fn finish(
        &self,
        method: Method,
        x_adv: Tensor<S>,
        logits: &Tensor<S>,
        iterations: usize,
        forwards: usize,
        loss_trace: Vec<S>,
    ) -> Result<AttackResult<S>> {
        let pred = logits.argmax();
        let success = pred != self.y;
        Ok(AttackResult {
            method,
            label: self.y,
            linf: linf_distance(&x_adv, self.x)?,
            l0: l0_norm(&x_adv.zip_map(self.x, |a, b| a - b)?),
            x_adv,
            pred,
            success,
            l0_before_reduction: None,
            iterations,
            gradient_calls: self.gradient_calls,
            forwards,
            loss_trace,
            failure: (!success).then_some(FailureReason::BudgetExhausted),
        })
    }
}

/// Fast gradient sign method: one signed step of size `eps`, projected and
/// clipped exactly like a PGD step.
pub fn fgsm<S: Scalar>(m: &NetworkModel<S>, x: &Tensor<S>, y: usize, cfg: &AttackConfig) -> Result<AttackResult<S>> {
    cfg.check(false)?;
    let (lo, hi, eps) = (S::lit(cfg.lo), S::lit(cfg.hi), S::lit(cfg.eps));
    check_domain(x, lo, hi)?;
    let mut ctx = Ctx {
        m,
        x,
        y,
        cfg,
        lo,
        hi,
        gradient_calls: 0,
    };
    let (dir, _, _) = ctx.ascent_direction(x)?;
    let x_adv = ctx.step(x, &dir, eps, eps)?;
    let logits = m.logits(&x_adv)?;
    let loss = cfg.loss.eval(&logits, y)?.loss;
    ctx.finish(Method::Fgsm, x_adv, &logits, 1, 1, vec![loss])
}

/// Projected gradient descent (ascent on the loss) from `x`, or from a
/// seeded random point of the ball. `loss_trace[k]` is the loss at `x^{k+1}`.
pub fn pgd<S: Scalar>(m: &NetworkModel<S>, x: &Tensor<S>, y: usize, cfg: &AttackConfig) -> Result<AttackResult<S>> {
    cfg.check(true)?;
    let (lo, hi, eps, alpha) = (S::lit(cfg.lo), S::lit(cfg.hi), S::lit(cfg.eps), S::lit(cfg.alpha));
    check_domain(x, lo, hi)?;
    let mut ctx = Ctx {
        m,
        x,
        y,
        cfg,
        lo,
        hi,
        gradient_calls: 0,
    };

    let mut cur = match cfg.random_start {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = Tensor::from_fn(x.shape(), |i| {
                x.data()[i] + S::lit(rng.random_range(-1.0..=1.0) * cfg.eps)
            });
            clamp(&linf_project(&noisy, x, eps)?, lo, hi)?
        }
        None => x.clone(),
    };
    let mut trace = Vec::with_capacity(cfg.steps);
    // (successful, loss, iterate, logits) of the best iterate so far
    let mut best: Option<(bool, S, Tensor<S>, Tensor<S>)> = None;
    let mut forwards = 0;
    let mut last_logits = None;
    let (mut dir, _, _) = ctx.ascent_direction(&cur)?;
    for k in 0..cfg.steps {
        cur = ctx.step(&cur, &dir, alpha, eps)?;
        // The loss at x^{k+1} comes with the next gradient call; only the
        // final iterate needs a dedicated forward.
        let (loss, logits) = if k + 1 < cfg.steps {
            let (d, loss, logits) = ctx.ascent_direction(&cur)?;
            dir = d;
            (loss, logits)
        } else {
            forwards += 1;
            let logits = m.logits(&cur)?;
            (cfg.loss.eval(&logits, y)?.loss, logits)
        };
        trace.push(loss);
        let success = logits.argmax() != y;
        let better = best
            .as_ref()
            .is_none_or(|(bs, bl, _, _)| (success && !bs) || (success == *bs && loss > *bl));
        if cfg.track_best && better {
            best = Some((success, loss, cur.clone(), logits.clone()));
        }
        last_logits = Some(logits);
    }
    let (x_adv, logits) = match best {
        Some((_, _, xb, lb)) => (xb, lb),
        None => (cur, last_logits.expect("at least one step")),
    };
    ctx.finish(Method::Pgd, x_adv, &logits, cfg.steps, forwards, trace)
}
