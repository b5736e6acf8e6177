//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion, and exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use harness::data::{bars, blobs, model_input, Dataset};
use harness::eval::{
    aggregate_report, evaluate_attack, pixel_fraction_percent, AttackSpec, SampleOutcome, ThresholdAsr,
};
use harness::oracle::{bruteforce_sparse_oracle, gradcheck_oracle, mc_zeroth_order_oracle, GradcheckConfig};
use harness::presets::{build, tiny, Arch};
use harness::train::{train_minimal, TrainConfig, Trained};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use spikeattack::attack::{fgsm, pgd, AttackConfig, AttackRecord, FailureReason, Method};
use spikeattack::sda::{reduce_prefix, sda_attack, SdaConfig};
use spikeattack::stbp::ResetPath;
use spikeattack::tensor::linf_distance;
use spikeattack::{BinaryTensor, LossKind, NetworkModel, Surrogate, Tensor};

type Criterion = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed <= limit
}

fn blobs_victim() -> (Trained, Dataset) {
    let (train, test) = blobs(600, 0.08, 0).split(200);
    let cfg = TrainConfig {
        epochs: 12,
        seed: 0,
        ..TrainConfig::default()
    };
    (
        train_minimal(Arch::ConvBlobs, &train, &test, &cfg).expect("training"),
        test,
    )
}

fn bars_victim() -> (Trained, Dataset) {
    let (train, test) = bars(600, 10, 0).expect("dataset").split(200);
    let cfg = TrainConfig {
        epochs: 6,
        seed: 0,
        ..TrainConfig::default()
    };
    (
        train_minimal(Arch::ConvBars, &train, &test, &cfg).expect("training"),
        test,
    )
}

/// 1. Gradient correctness against finite differences, and mutation detection.
fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let (victim, test) = blobs_victim();
    let m = &victim.model;
    let cfg = GradcheckConfig {
        coords: None,
        ..GradcheckConfig::default()
    };
    let mut worst: f64 = 0.0;
    let mut weakest_mutation = f64::INFINITY;
    let mut coords = 0;
    for i in 0..5 {
        let x = model_input(m, &test.inputs[i], 0).unwrap();
        let y = test.labels[i];
        let r = gradcheck_oracle(m, &x, y, &cfg).unwrap();
        worst = worst.max(r.max_rel_err);
        coords = r.coords_checked;
        let mutated = GradcheckConfig {
            reset_path: ResetPath::Inverted,
            ..cfg
        };
        weakest_mutation = weakest_mutation.min(gradcheck_oracle(m, &x, y, &mutated).unwrap().max_rel_err);
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-4 && weakest_mutation > 1e-2 && coords >= 200 && within(Duration::from_secs(60), elapsed),
        format!(
            "max rel err {worst:.2e} (< 1e-4) over {coords} coords x 5 inputs; reset-path mutation {weakest_mutation:.2e} (> 1e-2); {elapsed:.1?}"
        ),
    )
}

/// 2. Monte-Carlo zeroth-order estimate agrees with the closed form.
fn pdsg_closed_form() -> Verdict {
    let start = Instant::now();
    let v_th = 1.0;
    let mut worst_z: f64 = 0.0;
    let mut points = 0;
    for (k, sigma) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let us: Vec<f64> = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]
            .iter()
            .map(|o| v_th + o * sigma)
            .collect();
        for p in mc_zeroth_order_oracle(&us, v_th, sigma, 1_000_000, 100 + k as u64).unwrap() {
            worst_z = worst_z.max(p.z_score());
            points += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst_z < 3.0 && within(Duration::from_secs(60), elapsed),
        format!("{points} points, worst |estimate - closed form| = {worst_z:.2} stderr (< 3); {elapsed:.1?}"),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let inner: f64 = (1..panels)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// 3. Symmetry, normalization and peak height of the potential-dependent surrogate.
fn pdsg_properties() -> Verdict {
    let v_th = 1.0;
    let mut asym: f64 = 0.0;
    let mut mass_err: f64 = 0.0;
    let mut peak_err: f64 = 0.0;
    for b in [0.0, 0.5] {
        let sg = Surrogate::pdsg(b).unwrap();
        for sigma in [0.1, 1.0, 10.0] {
            let f = |u: f64| sg.derivative(u, v_th, Some(sigma));
            let centre = v_th + b * sigma;
            for k in 1..=200 {
                let d = k as f64 * 0.037 * sigma;
                let (l, r) = (f(centre - d), f(centre + d));
                if l.max(r) > 0.0 {
                    asym = asym.max((l - r).abs() / l.max(r));
                }
            }
            let mass = simpson(f, centre - 8.0 * sigma, centre + 8.0 * sigma, 20_000);
            mass_err = mass_err.max((mass - 1.0).abs());
            peak_err = peak_err.max((f(centre) - 1.0 / ((2.0 * PI).sqrt() * sigma)).abs());
        }
    }
    verdict(
        asym < 1e-12 && mass_err < 1e-6 && peak_err < 1e-9,
        format!(
            "asymmetry {asym:.1e} (rounding), |mass - 1| {mass_err:.1e} (< 1e-6), peak error {peak_err:.1e} (< 1e-9)"
        ),
    )
}

/// 4. ℓ∞ attack contracts on random instances.
fn linf_contracts() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut mismatches = 0;
    let instances = 1000;
    for i in 0..instances {
        let arch = if i % 2 == 0 { Arch::ConvBlobs } else { Arch::DenseBlobs };
        let m = build(arch, i as u64);
        let x = Tensor::from_fn(&m.full_input_shape(), |_| rng.random_range(0.0..=1.0));
        let y = rng.random_range(0..2);
        let mut cfg = AttackConfig::new(rng.random_range(0.0..0.3));
        cfg.steps = rng.random_range(1..6);
        cfg.alpha = rng.random_range(0.001..0.2);
        cfg.loss = if rng.random_bool(0.5) {
            LossKind::CrossEntropy
        } else {
            LossKind::CwMargin
        };
        cfg.surrogate = match i % 3 {
            0 => Surrogate::pdsg(0.5).unwrap(),
            1 => Surrogate::pdsg(0.0).unwrap(),
            _ => Surrogate::atan(2.0).unwrap(),
        };
        cfg.time_shared = rng.random_bool(0.5);
        let ok = |adv: &Tensor<f64>| {
            linf_distance(adv, &x).unwrap() <= cfg.eps && adv.data().iter().all(|&v| (cfg.lo..=cfg.hi).contains(&v))
        };
        let f = fgsm(&m, &x, y, &cfg).unwrap();
        let p = pgd(&m, &x, y, &cfg).unwrap();
        violations += usize::from(!ok(&f.x_adv)) + usize::from(!ok(&p.x_adv));
        let single = AttackConfig {
            steps: 1,
            alpha: cfg.eps,
            ..cfg.clone()
        };
        if single.eps > 0.0 {
            let p1 = pgd(&m, &x, y, &single).unwrap();
            mismatches += usize::from(p1.x_adv.data() != f.x_adv.data());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        violations == 0 && mismatches == 0,
        format!("{instances} instances: {violations} ball/domain violations, {mismatches} PGD(1, eps) != FGSM; {elapsed:.1?}"),
    )
}

/// 5. Desk-scale ℓ∞ trend on the trained conv victim.
fn linf_trend() -> Verdict {
    let start = Instant::now();
    let (victim, test) = blobs_victim();
    let m = &victim.model;
    let acc = victim.test_accuracy;
    let run = |b: f64| {
        let mut cfg = AttackConfig::new(8.0 / 255.0);
        cfg.surrogate = Surrogate::pdsg(b).unwrap();
        cfg.time_shared = true;
        evaluate_attack(m, &test, &AttackSpec::Pgd(cfg), 100, &[], 0).unwrap()
    };
    let shifted = run(0.5);
    let centred = run(0.0);
    let mut fgsm_cfg = AttackConfig::new(8.0 / 255.0);
    fgsm_cfg.time_shared = true;
    let single = evaluate_attack(m, &test, &AttackSpec::Fgsm(fgsm_cfg), 100, &[], 0).unwrap();
    let elapsed = start.elapsed();
    let (asr_b, asr_0) = (shifted.report.asr, centred.report.asr);
    let trend = if asr_b >= asr_0 {
        "holds"
    } else if asr_0 - asr_b <= 2.0 {
        "within 2 pp, report-only"
    } else {
        "violated"
    };
    verdict(
        acc >= 0.95
            && shifted.report.attacked == 100
            && asr_b >= 90.0
            && trend != "violated"
            && within(Duration::from_secs(300), elapsed),
        format!(
            "test acc {:.1}%; PGD-PDSG(b=0.5) ASR {asr_b:.1}% over {} samples (>= 90); b=0 ASR {asr_0:.1}% (trend {trend}); FGSM ASR {:.1}%; {elapsed:.1?}",
            100.0 * acc,
            shifted.report.attacked,
            single.report.asr
        ),
    )
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

/// 6. SDA contracts and reduction benefit on the binary-frame victim.
fn sda_contracts() -> Verdict {
    let start = Instant::now();
    let (victim, test) = bars_victim();
    let m = &victim.model;
    let chosen: Vec<usize> = (0..test.len())
        .filter(|&i| m.predict(&test.inputs[i]).unwrap() == test.labels[i])
        .take(100)
        .collect();
    let cfg = SdaConfig::default();
    let results: Vec<_> = chosen
        .par_iter()
        .map(|&i| {
            let x = BinaryTensor::from_tensor(&test.inputs[i]).unwrap();
            (i, x.clone(), sda_attack(m, &x, test.labels[i], &cfg).unwrap())
        })
        .collect();
    let mut bad = 0;
    let (mut after, mut before) = (Vec::new(), Vec::new());
    for (i, x, out) in &results {
        let r = &out.result;
        let l0_before = r.l0_before_reduction.unwrap();
        if r.l0 > l0_before {
            bad += 1;
        }
        if r.success {
            let binary = BinaryTensor::from_tensor(&r.x_adv).is_ok();
            let fresh = m.predict(&r.x_adv).unwrap() != test.labels[*i];
            let in_mask = (0..x.numel()).all(|j| out.x_final.get(j) == x.get(j) || out.mask.contains(j));
            if !(binary && fresh && in_mask) {
                bad += 1;
            }
            after.push(r.l0);
            before.push(l0_before);
        }
    }
    let successes = after.len();
    let asr = 100.0 * successes as f64 / results.len() as f64;
    let (med_after, med_before) = (median(after), median(before));
    let elapsed = start.elapsed();
    verdict(
        results.len() == 100
            && bad == 0
            && successes == results.len()
            && med_after < med_before
            && within(Duration::from_secs(600), elapsed),
        format!(
            "{} samples (test acc {:.1}%): {bad} contract violations, ASR {asr:.1}%, median l0 {med_after} with reduction vs {med_before} without; {elapsed:.1?}",
            results.len(),
            100.0 * victim.test_accuracy
        ),
    )
}

/// 7. Binary-search reduction equals a linear scan under monotone predicates.
fn reduction_search() -> Verdict {
    let mut disagreements = 0;
    let mut over_budget = 0;
    let mut cases = 0;
    for n in 1..=64usize {
        let bound = (n as f64).log2().ceil() as usize + 1;
        for t in 0..=n {
            let found = reduce_prefix(n, |j| Ok(j < t)).unwrap();
            let linear = (0..n).take_while(|&j| j < t).count();
            disagreements += usize::from(found.removable != linear);
            over_budget += usize::from(found.probes > bound);
            cases += 1;
        }
    }
    verdict(
        disagreements == 0 && over_budget == 0,
        format!(
            "{cases} (n, threshold) cases: {disagreements} disagreements, {over_budget} over ceil(log2 n)+1 probes"
        ),
    )
}

/// 8. Exhaustive search lower-bounds SDA on tiny instances.
fn optimality_bound() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut both = 0;
    let mut violations = 0;
    let mut ratios = Vec::new();
    let instances = 50;
    for seed in 0..instances {
        let m: NetworkModel<f64> = tiny(seed);
        let x = BinaryTensor::new(
            m.full_input_shape(),
            (0..18).map(|_| rng.random_bool(0.5) as u8).collect(),
        )
        .unwrap();
        let y = m.predict(&x.to_tensor()).unwrap();
        let sda = sda_attack(&m, &x, y, &SdaConfig::default()).unwrap();
        let best = bruteforce_sparse_oracle(&m, &x, y, 3).unwrap();
        if let (true, Some(k)) = (sda.result.success, best) {
            both += 1;
            violations += usize::from(k > sda.result.l0);
            ratios.push(sda.result.l0 as f64 / k as f64);
        }
    }
    ratios.sort_by(f64::total_cmp);
    let optimal = ratios.iter().filter(|&&r| r == 1.0).count();
    let dist = if ratios.is_empty() {
        "-".to_string()
    } else {
        format!(
            "min {:.2} median {:.2} max {:.2}, optimal {optimal}/{}",
            ratios[0],
            ratios[ratios.len() / 2],
            ratios[ratios.len() - 1],
            ratios.len()
        )
    };
    let elapsed = start.elapsed();
    verdict(
        violations == 0 && both > 0,
        format!("{instances} instances, {both} with both successful: {violations} bound violations; SDA/optimum ratio {dist}; {elapsed:.1?}"),
    )
}

fn record(sample: usize, success: bool, l0: usize, iterations: usize, failure: Option<FailureReason>) -> SampleOutcome {
    SampleOutcome::Attacked(AttackRecord {
        sample,
        method: Method::Sda,
        label: 0,
        pred: usize::from(success),
        success,
        linf: 1.0,
        l0,
        l0_before: Some(l0),
        iterations,
        gradient_calls: iterations,
        forwards: 0,
        loss_trace: vec![],
        failure,
    })
}

/// 9. Evaluation accounting on a hand-computed fixture.
fn protocol_fidelity() -> Verdict {
    let fixture = vec![
        record(0, true, 10, 2, None),
        record(1, true, 30, 4, None),
        record(2, true, 250, 10, None),
        record(3, true, 900, 40, None),
        record(4, false, 0, 500, Some(FailureReason::IterationCap)),
        // succeeded only after the cap: counts as a failure
        record(5, true, 5, 501, None),
        SampleOutcome::Error {
            sample: 6,
            message: "fixture".into(),
        },
    ];
    let r = aggregate_report(&fixture, 500, &[200, 800]);
    // attacked 6 (error excluded); successes {10, 30, 250, 900}
    let fixture_ok = r.attacked == 6
        && r.successes == 4
        && (r.asr - 400.0 / 6.0).abs() < 1e-12
        && r.mean_l0 == Some(297.5)
        && r.median_l0 == Some(140.0)
        && r.mean_iterations == Some(1057.0 / 6.0)
        && r.bounded
            == vec![
                ThresholdAsr {
                    l0_below: 200,
                    asr: 200.0 / 6.0,
                },
                ThresholdAsr {
                    l0_below: 800,
                    asr: 50.0,
                },
            ]
        && r.errors == 1;

    let failures = vec![record(0, false, 0, 500, Some(FailureReason::IterationCap)); 3];
    let none = aggregate_report(&failures, 500, &[200]);
    let all_fail_ok = none.asr == 0.0 && none.mean_l0.is_none() && none.median_l0.is_none();

    // fewer correct samples than the budget: all of them are attacked
    let m = build(Arch::DenseBlobs, 3);
    let small = blobs(12, 0.1, 9);
    let ev = evaluate_attack(&m, &small, &AttackSpec::Fgsm(AttackConfig::new(0.01)), 100, &[], 0).unwrap();
    let budget_ok = ev.report.attacked == ev.correct_available && ev.correct_available <= 12;

    // byte-for-byte reproducible reports
    let again = evaluate_attack(&m, &small, &AttackSpec::Fgsm(AttackConfig::new(0.01)), 100, &[], 0).unwrap();
    let repro_ok = serde_json::to_string(&ev.report).unwrap() == serde_json::to_string(&again.report).unwrap();

    verdict(
        fixture_ok && all_fail_ok && budget_ok && repro_ok,
        format!(
            "fixture {}, all-fail {}, short budget {} ({} attacked), reproducible {}",
            ok_word(fixture_ok),
            ok_word(all_fail_ok),
            ok_word(budget_ok),
            ev.report.attacked,
            ok_word(repro_ok)
        ),
    )
}

fn ok_word(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "WRONG"
    }
}

/// 10. ℓ0 bookkeeping on an event-camera-sized volume.
fn l0_bookkeeping() -> Verdict {
    let p = pixel_fraction_percent(800, &[10, 2, 128, 128]);
    let rounded = (p * 100.0).round() / 100.0;
    verdict(
        (p - 0.244).abs() < 5e-4 && rounded == 0.24,
        format!("800 of 10x2x128x128 entries = {p:.4}% (rounds to {rounded:.2}%)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("gradient correctness", gradient_correctness),
        ("surrogate closed form", pdsg_closed_form),
        ("surrogate properties", pdsg_properties),
        ("l-inf attack contracts", linf_contracts),
        ("l-inf desk-scale trend", linf_trend),
        ("sparse attack contracts", sda_contracts),
        ("reduction search", reduction_search),
        ("optimality bound", optimality_bound),
        ("protocol fidelity", protocol_fidelity),
        ("l0 bookkeeping", l0_bookkeeping),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {} {name}: {}",
            n + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
