mod common;

use common::{conv_net, dense_net, unit_input};
use proptest::prelude::*;
use spikeattack::attack::{fgsm, pgd, AttackConfig, AttackRecord, FailureReason, Method};
use spikeattack::tensor::linf_distance;
use spikeattack::{LossKind, Surrogate, Tensor};

fn within_ball_and_domain(x: &Tensor<f64>, adv: &Tensor<f64>, cfg: &AttackConfig) -> bool {
    linf_distance(adv, x).unwrap() <= cfg.eps && adv.data().iter().all(|&v| v >= cfg.lo && v <= cfg.hi)
}

#[test]
fn zero_budget_returns_input() {
    let m = conv_net(1, 1, 3, 3);
    let x = unit_input(2, &[3, 1, 4, 4]);
    let r = fgsm(&m, &x, 0, &AttackConfig::new(0.0)).unwrap();
    assert_eq!(r.x_adv, x);
    assert_eq!(r.l0, 0);
}

#[test]
fn zero_gradient_leaves_input_unchanged() {
    // all-zero head: logits are constant, every gradient vanishes
    let mut m = dense_net(3, &[2, 2], 4, 2, 2, 1.0);
    for (_, w, b) in m.params_mut() {
        w.fill(0.0);
        b.fill(0.0);
    }
    let x = unit_input(4, &[2, 2, 2]);
    let r = fgsm(&m, &x, 0, &AttackConfig::new(0.1)).unwrap();
    assert_eq!(r.x_adv, x);
    assert!(!r.success);
    assert_eq!(r.failure, Some(FailureReason::BudgetExhausted));
}

#[test]
fn single_step_pgd_is_fgsm() {
    for seed in 0..20 {
        let m = conv_net(seed, 2, 3, 3);
        let x = unit_input(seed + 100, &[3, 2, 4, 4]);
        let mut cfg = AttackConfig::new(8.0 / 255.0);
        cfg.steps = 1;
        cfg.alpha = cfg.eps;
        for loss in [LossKind::CrossEntropy, LossKind::CwMargin] {
            cfg.loss = loss;
            let a = fgsm(&m, &x, 1, &cfg).unwrap();
            let b = pgd(&m, &x, 1, &cfg).unwrap();
            assert_eq!(a.x_adv, b.x_adv);
            assert_eq!(a.success, b.success);
        }
    }
}

#[test]
fn time_shared_steps_keep_direct_coding_replicated() {
    let m = conv_net(5, 1, 2, 4);
    let img = unit_input(6, &[1, 4, 4]);
    let x = spikeattack::coding::encode_direct(&img, 4).unwrap();
    let mut cfg = AttackConfig::new(0.05);
    cfg.time_shared = true;
    let r = pgd(&m, &x, 0, &cfg).unwrap();
    for t in 1..4 {
        assert_eq!(r.x_adv.slice_data(t), r.x_adv.slice_data(0));
    }
}

#[test]
fn pgd_is_deterministic_and_traces_every_step() {
    let m = dense_net(7, &[1, 3, 3], 6, 3, 3, 1.5);
    let x = unit_input(8, &[3, 1, 3, 3]);
    let mut cfg = AttackConfig::new(0.1);
    cfg.random_start = Some(9);
    let a = pgd(&m, &x, 2, &cfg).unwrap();
    assert_eq!(a, pgd(&m, &x, 2, &cfg).unwrap());
    assert_eq!(a.loss_trace.len(), 10);
    assert_eq!(a.gradient_calls, 10);
    assert_eq!(a.method, Method::Pgd);
    let line = serde_json::to_string(&a.record(4)).unwrap();
    let back: AttackRecord = serde_json::from_str(&line).unwrap();
    assert_eq!(back, a.record(4));
}

#[test]
fn best_iterate_is_at_least_as_good_as_last() {
    for seed in 0..10 {
        let m = conv_net(seed, 1, 3, 3);
        let x = unit_input(seed + 50, &[3, 1, 4, 4]);
        let mut cfg = AttackConfig::new(0.1);
        cfg.track_best = true;
        let tracked = pgd(&m, &x, 0, &cfg).unwrap();
        cfg.track_best = false;
        let last = pgd(&m, &x, 0, &cfg).unwrap();
        assert!(tracked.success || !last.success);
        let best = tracked.loss_trace.iter().copied().fold(f64::MIN, f64::max);
        if !tracked.success {
            let logits = m.logits(&tracked.x_adv).unwrap();
            assert_eq!(cfg.loss.eval(&logits, 0).unwrap().loss, best);
        }
    }
}

#[test]
fn rejects_invalid_configs_and_inputs() {
    let m = conv_net(1, 1, 2, 2);
    let x = unit_input(1, &[2, 1, 4, 4]);
    let mut cfg = AttackConfig::new(0.1);
    cfg.steps = 0;
    assert!(pgd(&m, &x, 0, &cfg).is_err());
    let mut cfg = AttackConfig::new(-0.1);
    assert!(fgsm(&m, &x, 0, &cfg).is_err());
    cfg = AttackConfig::new(0.1);
    cfg.lo = 1.0;
    assert!(fgsm(&m, &x, 0, &cfg).is_err());
    assert!(fgsm(&m, &x.map(|v| v + 2.0), 0, &AttackConfig::new(0.1)).is_err());
    assert!(fgsm(&m, &x, 5, &AttackConfig::new(0.1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_stay_in_ball_and_domain(
        seed in 0u64..1000,
        eps in 0.0f64..0.5,
        steps in 1usize..6,
        cw in any::<bool>(),
        atan in any::<bool>(),
    ) {
        let m = conv_net(seed, 1, 3, 2);
        let x = unit_input(seed ^ 0xabc, &[2, 1, 4, 4]);
        let mut cfg = AttackConfig::new(eps);
        cfg.steps = steps;
        cfg.alpha = eps.max(1e-3) / 2.0;
        cfg.loss = if cw { LossKind::CwMargin } else { LossKind::CrossEntropy };
        if atan {
            cfg.surrogate = Surrogate::atan(2.0).unwrap();
        }
        let f = fgsm(&m, &x, 1, &cfg).unwrap();
        prop_assert!(within_ball_and_domain(&x, &f.x_adv, &cfg));
        let p = pgd(&m, &x, 1, &cfg).unwrap();
        prop_assert!(within_ball_and_domain(&x, &p.x_adv, &cfg));
        prop_assert_eq!(p.success, m.predict(&p.x_adv).unwrap() != 1);
    }
}
