use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikeattack"))
        .current_dir(dir)
        .env_remove("SPIKEATTACK_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn dataset_train_attack_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = run(d, args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    ok(&[
        "--seed", "0", "dataset", "--kind", "blobs", "--count", "60", "--out", "data",
    ]);
    let train = ok(&[
        "--seed",
        "0",
        "train",
        "--arch",
        "dense-blobs",
        "--data",
        "data",
        "--test-split",
        "20",
        "--epochs",
        "2",
        "--out",
        "m.snnm",
    ]);
    assert!(train.contains("test accuracy"));
    let attack = ok(&[
        "attack",
        "--model",
        "m.snnm",
        "--data",
        "data",
        "--method",
        "pgd",
        "--eps",
        "8/255",
        "--samples",
        "5",
        "--records",
        "r.jsonl",
        "--report",
        "report.json",
    ]);
    assert!(attack.contains("ASR"));
    let eval = ok(&["eval", "--records", "r.jsonl", "--thresholds", "10"]);
    assert!(eval.contains("ASR"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("report.json")).unwrap()).unwrap();
    assert!(report["attacked"].as_u64().unwrap() <= 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // unreadable model
    assert_eq!(
        run(
            d,
            &[
                "attack",
                "--model",
                "missing.snnm",
                "--data",
                "nowhere",
                "--method",
                "fgsm"
            ]
        )
        .status
        .code(),
        Some(3)
    );
    // bad configuration file
    std::fs::write(d.join("bad.toml"), "unknown_key = 1\n").unwrap();
    assert_eq!(run(d, &["--config", "bad.toml", "oracle", "mc"]).status.code(), Some(2));
}

#[test]
fn mc_oracle_reports_every_offset() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["oracle", "mc", "--sigma", "1", "--samples", "20000"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().count() >= 3);
}
